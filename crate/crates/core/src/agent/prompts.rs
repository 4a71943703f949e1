//! Prompt text sent to the model.

/// System prompt for the tool-calling agent.
pub const SYSTEM_PROMPT: &str = r##"You are a coding assistant which should help to solve user's error in computational notebook.
You should use functions to help handle the real time user queries and return outputs ONLY in the form of a valid JSON.

Remember:
  1. Keep trying for at least 10 steps before you stop. But if you think you solved the problem, you can finish right away.
  2. Use Python code only. When you need to explain what you did, write it as a comment in the code or in the `comment` field of the JSON.
  3. If you can fix the error without changing any code, do that. Don't edit the existing code or add new code unless you really need to.
  4. Use only the functions given to you. If you have many functions to choose from, pick the one that solves the problem quickest.
  5. Don't run the cell that caused the error. If you think you've fixed the error, run the "finish" function instead.
  6. If nothing shows up after you run a cell, that means there were no errors or outputs.

After you've done actions that you think have fixed the problem, run "finish" to say you're done. 
It's better to run a cell as is to fix errors than to change the cell's code.

You have a few ways of interacting with the environment:
  1. You can suggest new code for the existing cells, run it, and give the output.
  2. You can make a new cell with your own code, run it, and give the output.
  3. You can run any cell as is and give the output.
  4. If you're sure the error won't show up in the cell it was found in, you can run "finish"."##;

/// Template for the first user message. Placeholders: `{separator}`,
/// `{notebook}`, `{cell_num}`, `{error}`.
pub const INITIAL_PROMPT_TEMPLATE: &str = r##"Here's a Jupyter notebook. It uses `{separator}` as a separator between cells. Note that cells indexes START FROM 1!
```
{notebook}
```
Error occurred in cell with num {cell_num}.
The error trace is the following:
```
{error}
```
Please resolve the error.
You must use only defined functions for solving the error. Return output only as a valid JSON.
YOU MUST NOT WRITE ANY COMMENTS / THOUGHTS / PLANNING OUTSIDE OF the "comment" JSON FIELD!
After you perform actions which should solve the error, use function finish to indicate that.
IF IT'S POSSIBLE TO SOLVE ERROR WITHOUT CHANGING THE CODE YOU MUST DO THAT!
IF YOU NEED ANY EXTRA INFORMATION GET IT VIA EXECUTION OF NEW CELL (CREATE IT, CHANGE SOURCE AND EXECUTE)
IF YOU WANT TO WRITE ANY COMMENT USE "comment" FIELD IN FUNCTION CALL AND NOWHERE ELSE!
YOU MUST NOT CHANGE FILES OUTSIDE OF THE NOTEBOOK BUT CAN EXPLORE THE ENVIRONMENT VIA EXECUTING NOTEBOOK CELLS.
Just adding try-except is not a solution. Commenting the code that produced error is not the solution.  You should propose only meaningful final solutions.
While exploring you must avoid large outputs, so be careful with prints."##;

/// Prompt for the single-action strategy: one reply, no tools.
pub const SINGLE_ACTION_TEMPLATE: &str = r##"Here's a Jupyter notebook. It uses `{separator}` as a separator between cells. Cell indexes start from 1.
```
{notebook}
```
Error occurred in cell with num {cell_num}.
The error trace is the following:
```
{error}
```
Think step by step about what causes the error. Then write the complete new source of cell {cell_num} that resolves it, as a single fenced ```python code block. The block replaces the cell as a whole. Do not just wrap the code in try-except or comment it out."##;

pub fn build_system_prompt() -> String {
    SYSTEM_PROMPT.to_string()
}

pub fn build_initial_prompt(rendered_nb: &str, cell_num: usize, traceback: &str, separator: &str) -> String {
    fill(INITIAL_PROMPT_TEMPLATE, rendered_nb, cell_num, traceback, separator)
}

pub fn build_single_action_prompt(rendered_nb: &str, cell_num: usize, traceback: &str, separator: &str) -> String {
    fill(SINGLE_ACTION_TEMPLATE, rendered_nb, cell_num, traceback, separator)
}

/// Single left-to-right pass, so placeholder-like text inside the inserted
/// values is left alone.
fn fill(template: &str, notebook: &str, cell_num: usize, error: &str, separator: &str) -> String {
    let cell_num = cell_num.to_string();
    let mut out = String::with_capacity(template.len() + notebook.len() + error.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let tail = &rest[open..];
        let value = ["separator", "notebook", "cell_num", "error"]
            .into_iter()
            .find(|k| tail[1..].starts_with(k) && tail[1 + k.len()..].starts_with('}'));
        match value {
            Some(k) => {
                out.push_str(match k {
                    "separator" => separator,
                    "notebook" => notebook,
                    "cell_num" => &cell_num,
                    _ => error,
                });
                rest = &tail[k.len() + 2..];
            }
            None => {
                out.push('{');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substitution_is_single_pass() {
        let p = build_initial_prompt("print('{error}')", 3, "NameError: {notebook}", "#=#");
        assert!(p.contains("print('{error}')"));
        assert!(p.contains("NameError: {notebook}"));
        assert!(p.contains("cell with num 3."));
        assert!(p.contains("It uses `#=#` as a separator"));
        assert!(!p.contains("{separator}") && !p.contains("{cell_num}"));
    }

    #[test]
    fn system_prompt_is_constant() {
        assert_eq!(build_system_prompt(), build_system_prompt());
        assert!(SYSTEM_PROMPT.contains("say you're done. \nIt's better"));
    }
}
