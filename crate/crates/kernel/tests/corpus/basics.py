x = 5
y = x * 2 + 3 ** 2 - 7 // 2 % 3
print(x, y, -7 // 2, -7 % 3, 7 / 2, 2 ** -1)
a, b = 1, 2
a, b = b, a
print(a, b)
s = "hello world"
print(s.upper(), s.split(), s[1:4], s[::-1], s[-1], len(s))
print("%s has %d chars (%.1f%%)" % (s, len(s), 12.5))
print(f"{x:>4}|{3.14159:.2f}|{1234567:,}|{'ab'!r}|{x + 1}")
print("{} and {name}".format(1, name="two"))
print(repr(0.1 + 0.2), 1e20, 1.5e-7, 10 / 4, float("3"), int("42"), int(3.9), round(2.5), round(3.14159, 2))
print(True + 1, None, [1, "a", None, 2.0], (1,), {"k": [1, 2]}, {})
print(" a b ".strip(), "a,b,,c".split(","), "-".join(["x", "y"]), "abc".replace("b", "B"))
print(str(3), bool(0), bool("x"), abs(-3), min(3, 1, 2), max([1, 5, 2]), sum([1, 2, 3]), sum([0.5, 0.25]))
print(sorted([3, 1, 2], reverse=True), sorted(["b", "A", "c"], key=str.lower if False else None))
print(list(range(5)), list(range(10, 0, -3)), list(enumerate("ab")), list(zip([1, 2], "xyz")))
print(isinstance(1, int), isinstance(True, int), isinstance(1.0, (int, str)), type(1.0), type("x") == str)
print("b" in "abc", 2 in [1, 2], "k" in {"k": 1}, 3 not in range(3), 1 < 2 < 3, 1 < 3 < 2)
print(0 or "x", 1 and 2, not [], None is None, [] == [], 1 == 1.0)
print(divmod(-7, 2), 7 % -3, 2 ** 10, 10 ** 18, chr(65), ord("a"))
print("x".center(5, "*"), "7".zfill(3), "Hello World".lower().title(), "abc".startswith(("x", "a")))
