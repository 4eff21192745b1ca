use crate::dsl::{Stmt, StmtKind};
use crate::toolsim::Registry;

use super::ExecConfig;

/// Upper bound on the ticks a block can consume inside a STRICT region.
///
/// Calls count at their worst-case cost and every loop at the secret
/// iteration cap, so the bound needs no knowledge of runtime values.
pub fn static_cost(block: &[Stmt], registry: &Registry, config: &ExecConfig) -> u64 {
    block.iter().map(|s| stmt_cost(s, registry, config)).fold(0, u64::saturating_add)
}

fn stmt_cost(stmt: &Stmt, registry: &Registry, config: &ExecConfig) -> u64 {
    let unit = config.stmt_cost;
    let body = |b: &[Stmt]| static_cost(b, registry, config);
    let inner = match &stmt.kind {
        StmtKind::Let { .. } => 0,
        StmtKind::Call { tool, .. } => registry.get(tool).map_or(0, |t| t.worst_case_cost),
        StmtKind::If {
            then_branch,
            else_branch,
            ..
        } => body(then_branch).max(body(else_branch)),
        StmtKind::Match { ok_arm, err_arm, .. } => body(&ok_arm.body).max(body(&err_arm.body)),
        StmtKind::ForRange { body: b, .. } | StmtKind::ForEach { body: b, .. } => {
            body(b).saturating_mul(config.max_secret_iterations as u64)
        }
    };
    unit.saturating_add(inner)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;

    fn cost(src: &str) -> u64 {
        static_cost(&parse(src).unwrap().statements, &Registry::standard(), &ExecConfig::default())
    }

    #[test]
    fn straight_line() {
        assert_eq!(cost(""), 0);
        assert_eq!(cost("let x = 1"), 1);
        assert_eq!(cost("call fetch(\"a\")"), 6);
    }

    #[test]
    fn branches_take_the_max() {
        assert_eq!(cost("if true { call send_email(\"a\", \"b\", \"c\") } else { let y = 2 }"), 1 + 9);
    }

    #[test]
    fn loops_use_the_cap() {
        assert_eq!(cost("for i in range(3) { call fetch(\"a\") }"), 1 + 64 * 6);
        assert_eq!(cost("for i in range(3) { for j in range(2) { let z = 1 } }"), 1 + 64 * (1 + 64));
    }
}
