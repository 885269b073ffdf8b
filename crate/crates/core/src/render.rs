//! Line-oriented text rendering of grid states, used in prompts and logs.

use crate::state::{Cell, Color, GridState, ObjectKind, StateError};

/// Renders a state as text. Each non-empty cell is one
/// `(row, col, object, color, extra)` line; identical states render
/// identically.
pub fn render_state_text(state: &GridState) -> String {
    let mut out = String::new();
    out.push_str(&format!("grid: {} rows x {} cols\n", state.height, state.width));
    out.push_str(&format!("instruction: {}\n", state.instruction));
    let agent = state.agent_pos();
    let carrying = match state.carrying {
        Some((o, c)) => format!("{c} {o}"),
        None => "nothing".to_string(),
    };
    out.push_str(&format!(
        "agent: row {} col {} facing {} carrying {}\n",
        agent.y,
        agent.x,
        state.agent_dir().name(),
        carrying
    ));
    if state.under_agent != Cell::EMPTY {
        let u = state.under_agent;
        out.push_str(&format!("under agent: {} {} {}\n", u.object, u.color, u.extra));
    }
    for (idx, cell) in state.cells.iter().enumerate() {
        if cell.object == ObjectKind::Empty {
            continue;
        }
        out.push_str(&format!(
            "({}, {}, {}, {}, {})\n",
            idx / state.width,
            idx % state.width,
            cell.object,
            cell.color,
            cell.extra
        ));
    }
    out
}

/// A parsed `(row, col, object, color, extra)` line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellLine {
    pub row: usize,
    pub col: usize,
    pub cell: Cell,
}

/// Parses the cell lines back out of [`render_state_text`] output.
pub fn parse_cell_lines(text: &str) -> Result<Vec<CellLine>, StateError> {
    let mut lines = Vec::new();
    for line in text.lines() {
        let Some(inner) = line.strip_prefix('(').and_then(|l| l.strip_suffix(')')) else {
            continue;
        };
        let parts: Vec<&str> = inner.split(", ").collect();
        if parts.len() != 5 {
            continue;
        }
        let (Ok(row), Ok(col), Ok(extra)) = (
            parts[0].parse::<usize>(),
            parts[1].parse::<usize>(),
            parts[4].parse::<u8>(),
        ) else {
            continue;
        };
        lines.push(CellLine {
            row,
            col,
            cell: Cell::new(ObjectKind::from_name(parts[2])?, Color::from_name(parts[3])?, extra),
        });
    }
    Ok(lines)
}
