//! Reading programs from disk: typed files with untyped imports, and plain
//! untyped files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::ast::{line_col, Span};
use crate::blame::LabelInfo;
use crate::embed::embed;
use crate::parser::{parse_program, parse_untyped, ParseError};
use crate::term::{app, Term};
use crate::typer::{check_program_in, insert_casts, TypeEnv, TypeError};
use crate::types::{Mult, Type};

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}:{col}: parse error: {msg}")]
    Parse { file: String, line: usize, col: usize, msg: String },
    #[error("{file}:{line}:{col}: type error: {error}")]
    Type { file: String, line: usize, col: usize, error: TypeError },
}

impl Error {
    /// Process exit status for the failure: 2 for I/O, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            _ => 1,
        }
    }
}

/// A program ready to run, with the source of every cast label.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub term: Term,
    pub ty: Type,
    pub labels: Vec<LabelInfo>,
    /// File name to source text, for rendering spans.
    pub sources: BTreeMap<String, String>,
}

impl Loaded {
    pub fn label(&self, id: u32) -> Option<&LabelInfo> {
        self.labels.iter().find(|l| l.label.id == id)
    }

    /// `file:line:col-line:col`
    pub fn render_span(&self, file: &str, span: Span) -> String {
        match self.sources.get(file) {
            Some(src) => {
                let (l1, c1) = line_col(src, span.start);
                let (l2, c2) = line_col(src, span.end);
                format!("{}:{}:{}-{}:{}", file, l1, c1, l2, c2)
            }
            None => file.to_string(),
        }
    }
}

fn parse_err(file: &str, src: &str, e: ParseError) -> Error {
    let (line, col) = line_col(src, e.span.start);
    Error::Parse { file: file.to_string(), line, col, msg: e.msg }
}

fn type_err(file: &str, src: &str, error: TypeError) -> Error {
    let (line, col) = line_col(src, error.span.start);
    Error::Type { file: file.to_string(), line, col, error }
}

fn read(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

/// Compile typed source.  Imports are resolved against `base`, and bound as
/// `Dyn` around the body; their casts are numbered after the body's.
pub fn compile_typed(src: &str, file: &str, base: &Path) -> Result<Loaded, Error> {
    let prog = parse_program(src).map_err(|e| parse_err(file, src, e))?;
    let mut env = TypeEnv::new();
    for imp in &prog.imports {
        env.insert(imp.name.clone(), Type::Dyn);
    }
    let ty = check_program_in(&env, &prog.body).map_err(|e| type_err(file, src, e))?;
    let el = insert_casts(&env, &prog.body, file, 1).map_err(|e| type_err(file, src, e))?;
    let mut sources = BTreeMap::from([(file.to_string(), src.to_string())]);
    let mut labels = el.labels;
    let mut next = labels.len() as u32 + 1;
    let mut term = el.term;
    for imp in prog.imports.iter().rev() {
        let path: PathBuf = base.join(&imp.path);
        let usrc = read(&path)?;
        let ufile = path.display().to_string();
        let u = parse_untyped(&usrc).map_err(|e| parse_err(&ufile, &usrc, e))?;
        let emb = embed(&u, next, &ufile);
        next += emb.labels.len() as u32;
        labels.extend(emb.labels);
        sources.insert(ufile, usrc);
        term = app(Term::Lam(Mult::Un, imp.name.clone(), Type::Dyn, Box::new(term)), emb.term);
    }
    Ok(Loaded { term, ty, labels, sources })
}

/// Embed untyped source.
pub fn compile_untyped(src: &str, file: &str) -> Result<Loaded, Error> {
    let u = parse_untyped(src).map_err(|e| parse_err(file, src, e))?;
    let emb = embed(&u, 1, file);
    Ok(Loaded {
        term: emb.term,
        ty: Type::Dyn,
        labels: emb.labels,
        sources: BTreeMap::from([(file.to_string(), src.to_string())]),
    })
}

/// Load a typed program (with its imports) from disk.
pub fn load_typed(path: &Path) -> Result<Loaded, Error> {
    let src = read(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    compile_typed(&src, &path.display().to_string(), base)
}

pub fn load_untyped(path: &Path) -> Result<Loaded, Error> {
    let src = read(path)?;
    compile_untyped(&src, &path.display().to_string())
}
