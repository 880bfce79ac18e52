//! Split the column spaces of three rank-deficient views into joint,
//! partially-shared and individual structures.

use hnn::fixtures::example1;
use hnn::linalg::{DEFAULT_ANGLE_TOL, DEFAULT_RANK_TOL};
use hnn::subspaces::decompose;

fn main() -> hnn::error::Result<()> {
    let signals = example1::signals();
    let decomp = decompose(&signals, DEFAULT_RANK_TOL, DEFAULT_ANGLE_TOL)?;
    for (s, basis) in decomp.structures() {
        println!("{s}: dimension {}", basis.dim());
        for j in 0..basis.dim() {
            let v: Vec<String> = basis.matrix().column(j).iter().map(|x| format!("{x:+.4}")).collect();
            println!("    [{}]", v.join(" "));
        }
    }
    for d in 0..decomp.views {
        println!("column space of view {} has dimension {}", d + 1, decomp.column_spaces[d].dim());
    }
    Ok(())
}
