//! Catalog of named games.

use std::fmt::Write;

use serde::Serialize;

use super::config::GameData;
use crate::game::{make_harmonic_2x2x2, make_zero_sum, Game};

/// One catalog entry. Parametric families show their default instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub actions: &'static str,
    pub parameters: Option<&'static str>,
    pub provenance: &'static str,
    pub game: GameData,
}

const MP_ROW: [[f64; 2]; 2] = [[1.0, -1.0], [-1.0, 1.0]];

fn rows(m: &[[f64; 2]; 2]) -> Vec<Vec<f64>> {
    m.iter().map(|r| r.to_vec()).collect()
}

fn matching_pennies() -> Game {
    make_zero_sum(&rows(&MP_ROW)).expect("valid matrix").game
}

fn prisoners_dilemma() -> Game {
    Game::bimatrix(
        &rows(&[[3.0, 0.0], [5.0, 1.0]]),
        &rows(&[[3.0, 5.0], [0.0, 1.0]]),
    )
    .expect("valid bimatrix")
}

fn entry_deterrence() -> Game {
    Game::bimatrix(
        &rows(&[[0.0, 0.0], [-1.0, 1.0]]),
        &rows(&[[2.0, 2.0], [-1.0, 1.0]]),
    )
    .expect("valid bimatrix")
}

fn rock_paper_scissors() -> Game {
    let m = vec![
        vec![0.0, -1.0, 1.0],
        vec![1.0, 0.0, -1.0],
        vec![-1.0, 1.0, 0.0],
    ];
    make_zero_sum(&m).expect("valid matrix").game
}

/// Fixed games by name. Parametric families are built from their config keys.
pub fn builtin_game(name: &str) -> Option<Game> {
    match name {
        "matching_pennies" => Some(matching_pennies()),
        "prisoners_dilemma" => Some(prisoners_dilemma()),
        "entry_deterrence" => Some(entry_deterrence()),
        "rock_paper_scissors" => Some(rock_paper_scissors()),
        _ => None,
    }
}

pub fn list_builtins() -> Vec<CatalogEntry> {
    vec![
        CatalogEntry {
            name: "matching_pennies",
            actions: "heads (0), tails (1) for both players",
            parameters: None,
            provenance: "standard convention: u1 = [[1,-1],[-1,1]], u2 = -u1",
            game: GameData::from_game(&matching_pennies()),
        },
        CatalogEntry {
            name: "prisoners_dilemma",
            actions: "cooperate (0), defect (1)",
            parameters: None,
            provenance: "standard payoffs T=5, R=3, P=1, S=0",
            game: GameData::from_game(&prisoners_dilemma()),
        },
        CatalogEntry {
            name: "entry_deterrence",
            actions: "entrant: out (0), in (1); incumbent: fight (0), accommodate (1)",
            parameters: None,
            provenance:
                "conventional textbook tensor: out pays (0,2), fight (-1,-1), accommodate (1,1)",
            game: GameData::from_game(&entry_deterrence()),
        },
        CatalogEntry {
            name: "rock_paper_scissors",
            actions: "rock (0), paper (1), scissors (2)",
            parameters: None,
            provenance: "standard zero-sum convention, win 1, loss -1",
            game: GameData::from_game(&rock_paper_scissors()),
        },
        CatalogEntry {
            name: "harmonic_2x2x2",
            actions: "two actions for each of three players",
            parameters: Some(
                "game.harmonic_2x2x2 = [a, b, c, d, delta]: the five free deviation gains of a \
                 uniform harmonic 2x2x2 game; the other seven follow from the harmonic condition. \
                 Default instance shown: [1, 2, 3, 4, 5]",
            ),
            provenance: "constructed; harmonic for unit weights",
            game: GameData::from_game(&make_harmonic_2x2x2(1.0, 2.0, 3.0, 4.0, 5.0)),
        },
        CatalogEntry {
            name: "zero_sum",
            actions: "rows for player 0, columns for player 1",
            parameters: Some(
                "game.zero_sum = M: the game (M, -M); a fully mixed equilibrium, when one exists, \
                 becomes the harmonic center. Default instance shown: Matching Pennies",
            ),
            provenance: "constructed",
            game: GameData::from_game(&matching_pennies()),
        },
    ]
}

/// Human-readable catalog printed by `sgd-lab list`.
pub fn render_catalog() -> String {
    let mut out = String::new();
    for e in list_builtins() {
        let _ = writeln!(out, "{}", e.name);
        let _ = writeln!(out, "  actions:    {}", e.actions);
        if let Some(p) = e.parameters {
            let _ = writeln!(out, "  parameters: {p}");
        }
        let _ = writeln!(out, "  provenance: {}", e.provenance);
        let _ = writeln!(out, "  action counts: {:?}", e.game.action_counts);
        for (i, u) in e.game.payoffs.iter().enumerate() {
            let _ = writeln!(
                out,
                "  u{}: {}",
                i + 1,
                format_tensor(u, &e.game.action_counts)
            );
        }
        out.push('\n');
    }
    out
}

/// Two-player tensors print as matrices, larger ones as flat arrays.
fn format_tensor(u: &[f64], counts: &[usize]) -> String {
    let fmt_row = |r: &[f64]| {
        let items: Vec<String> = r.iter().map(|v| format!("{v}")).collect();
        format!("[{}]", items.join(","))
    };
    if counts.len() == 2 {
        let items: Vec<String> = u.chunks(counts[1]).map(fmt_row).collect();
        format!("[{}]", items.join(","))
    } else {
        fmt_row(u)
    }
}
