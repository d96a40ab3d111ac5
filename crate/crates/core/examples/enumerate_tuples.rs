//! Walk `Inc^m_n` in colexicographic order and round-trip ranks.
//!
//! `cargo run --example enumerate_tuples -- 5 3`

use banach_ustat::{count_tuples, enumerate_tuples, rank_tuple, unrank_tuple, Result};

fn main() -> Result<()> {
    let mut args = std::env::args()
        .skip(1)
        .map(|a| a.parse::<usize>().expect("usage: N M"));
    let n = args.next().unwrap_or(5);
    let m = args.next().unwrap_or(3);
    println!("C({n}, {m}) = {}", count_tuples(n, m)?);
    for t in enumerate_tuples(n, m) {
        let r = rank_tuple(&t, n)?;
        assert_eq!(unrank_tuple(r, n, m)?, t);
        println!("{r:>4}  {t}");
    }
    Ok(())
}
