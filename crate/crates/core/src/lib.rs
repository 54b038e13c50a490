//! Control flow graphs for Python-subset programs, CFG rendering, multimodal
//! prompt assembly and an evaluation harness for vision-language models.

pub mod cfg;
pub mod emit;
pub mod gateway;
pub mod harness;
pub mod oracle;
pub mod program;
pub mod prompt;

pub use cfg::{build_cfg, Branch, BuildError, Cfg, CfgEdge, CfgExit, CfgNode, NodeId, NodeKind, Violation};
pub use program::{parse_program, ParseError, SourceLine, SourceProgram, Target};
