//! Runs a few cells against the in-process kernel and prints what comes back.

use std::time::Duration;

use nbfix_kernel::{Kernel, MiniKernel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    std::fs::write(dir.path().join("data.csv"), "a,b\n1,2\n")?;
    let mut kernel = MiniKernel::new(dir.path().to_path_buf())?;
    for cell in ["x = 5", "print(x * 2)", "!ls", "x / 0", "x + 1"] {
        let r = kernel.execute(cell, Duration::from_secs(5))?;
        println!(">>> {cell}");
        print!("{}{}", r.stdout, r.stderr);
        if let Some(tb) = r.traceback {
            println!("{tb}");
        }
        if let Some(v) = r.result_repr {
            println!("{v}");
        }
    }
    Ok(())
}
