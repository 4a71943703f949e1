import math
import json
import os.path
from math import sqrt, pi as PI
import time as t
print(math.sqrt(16), math.floor(2.7), math.ceil(2.1), round(PI, 4), sqrt(2), math.log(math.e), math.isclose(0.1 + 0.2, 0.3))
data = json.loads('{"b": 1, "a": [1, 2.5, null, true, "x"], "c": {"d": "é"}}')
print(data, data["a"][1], list(data))
print(json.dumps(data))
print(json.dumps({"z": 1, "a": [1, 2]}, indent=2, sort_keys=True))
print(json.dumps("tab\there"), json.dumps([]), json.dumps({}), json.dumps(1.0))
try:
    json.loads("{bad")
except json.JSONDecodeError as e:
    print("decode error")
except ValueError:
    print("value error")
print(os.path.join("a", "b", "c.txt"), os.path.basename("/x/y.csv"), os.path.dirname("/x/y.csv"), os.path.splitext("d/f.tar.gz"))
print(type(t.time()))
