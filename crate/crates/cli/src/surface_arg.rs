//! Generator specs on the command line, e.g. `bumpy_torus(32,2,1,0.15,2,7)`.

use std::path::Path;

use immersa::{io, Error, GridImmersion, ParamGrid, Result, SurfaceSpec};

#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    pub spec: SurfaceSpec,
    pub n: usize,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::BadSpec(msg.into())
}

/// Splits `name(a, b(c, d), e)` into the name and its top-level arguments.
fn split_call(s: &str) -> Result<(&str, Vec<&str>)> {
    let s = s.trim();
    let open = s.find('(').ok_or_else(|| bad(format!("'{s}': expected name(args)")))?;
    if !s.ends_with(')') {
        return Err(bad(format!("'{s}': missing closing parenthesis")));
    }
    let (name, inner) = (s[..open].trim(), &s[open + 1..s.len() - 1]);
    let mut args = Vec::new();
    let (mut depth, mut start) = (0i32, 0);
    for (i, c) in inner.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                args.push(inner[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
        if depth < 0 {
            return Err(bad(format!("'{s}': unbalanced parentheses")));
        }
    }
    if depth != 0 {
        return Err(bad(format!("'{s}': unbalanced parentheses")));
    }
    if !inner.trim().is_empty() {
        args.push(inner[start..].trim());
    }
    Ok((name, args))
}

fn num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse().map_err(|_| bad(format!("bad {what} '{s}'")))
}

pub fn parse_generator(s: &str) -> Result<Generator> {
    let (name, args) = split_call(s)?;
    let arity = |k: usize| -> Result<()> {
        if args.len() == k {
            Ok(())
        } else {
            Err(bad(format!("{name} takes {k} arguments, got {}", args.len())))
        }
    };
    match name {
        "clifford" => {
            arity(1)?;
            Ok(Generator {
                spec: SurfaceSpec::Clifford,
                n: num(args[0], "grid size")?,
            })
        }
        "round_torus" => {
            arity(3)?;
            Ok(Generator {
                spec: SurfaceSpec::RoundTorus {
                    big: num(args[1], "R")?,
                    small: num(args[2], "r")?,
                },
                n: num(args[0], "grid size")?,
            })
        }
        "bumpy_torus" => {
            arity(6)?;
            Ok(Generator {
                spec: SurfaceSpec::Bumpy {
                    big: num(args[1], "R")?,
                    small: num(args[2], "r")?,
                    amplitude: num(args[3], "amplitude")?,
                    freq: num(args[4], "frequency")?,
                    seed: num(args[5], "seed")?,
                },
                n: num(args[0], "grid size")?,
            })
        }
        "scaled" => {
            arity(2)?;
            let inner = parse_generator(args[0])?;
            Ok(Generator {
                spec: inner.spec.scaled(num(args[1], "scale factor")?),
                n: inner.n,
            })
        }
        _ => Err(bad(format!("unknown surface generator '{name}'"))),
    }
}

impl Generator {
    pub fn generate(&self, stencil_order: usize) -> Result<GridImmersion> {
        self.spec.generate_on(ParamGrid::with_order(self.n, self.n, stencil_order)?)
    }
}

/// A generator spec if the argument looks like one, otherwise a surface file.
pub fn load_surface(arg: &str, stencil_order: usize) -> Result<GridImmersion> {
    if arg.contains('(') {
        parse_generator(arg)?.generate(stencil_order)
    } else {
        io::load_immersion(Path::new(arg), stencil_order)
    }
}
