//! Nash classification, club faces and harmonic checks on the builtin games.

use sgd_lab::cli::builtin_game;
use sgd_lab::game::{make_harmonic_2x2x2, MixedProfile, DEFAULT_FACE_CAP, DEFAULT_TOL};

fn main() -> sgd_lab::error::Result<()> {
    for name in ["prisoners_dilemma", "matching_pennies", "entry_deterrence"] {
        let game = builtin_game(name).expect("builtin");
        println!("{name}:");
        for profile in game.profiles() {
            let x = MixedProfile::vertex(game.action_counts(), &profile);
            println!(
                "  {profile:?} -> {:?}",
                game.classify_profile(&x, DEFAULT_TOL)?
            );
        }
        let faces = game.enumerate_club_faces(DEFAULT_FACE_CAP, DEFAULT_TOL)?;
        let shown: Vec<String> = faces.iter().map(|f| f.to_string()).collect();
        println!("  club faces: {}", shown.join(", "));
    }

    let harmonic = make_harmonic_2x2x2(1.0, -2.0, 0.5, 3.0, 0.25);
    let weights = vec![vec![0.5, 0.5]; 3];
    println!(
        "2x2x2 harmonic instance: residual {:.2e}, club faces {}",
        harmonic.max_harmonic_residual(&weights)?,
        harmonic
            .enumerate_club_faces(DEFAULT_FACE_CAP, DEFAULT_TOL)?
            .len()
    );
    Ok(())
}
