//! Prolongation bundle ranks and jet orders.

use killing_probe::oracles::rank_formula;

fn main() -> killing_probe::Result<()> {
    println!("{:>3} {:>3} {:>12} {:>12}", "n", "d", "rank", "N(n,d)");
    for (n, d) in [(2, 1), (3, 1), (4, 1), (5, 1), (6, 1), (2, 2), (3, 2), (2, 3), (3, 3)] {
        let (rank, jet) = rank_formula(n, d)?;
        println!("{n:>3} {d:>3} {rank:>12} {jet:>12}");
    }
    let (big, _) = rank_formula(20, 20)?;
    println!("rank(20, 20) = {big}");
    Ok(())
}
