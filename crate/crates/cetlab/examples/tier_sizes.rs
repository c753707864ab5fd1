use cetlab::explore::*;
use std::io::Write;
use std::time::Instant;

fn main() {
    let limits = ExploreLimits::default();
    for n in 2..=4usize {
        for class in [TierClass::Level1, TierClass::AlmostLevel1, TierClass::All] {
            for k in 0..n {
                let t = Tier::new(NetKind::SemiDirected, default_leaves(n), k, class).unwrap();
                print!("{} ", t.describe());
                std::io::stdout().flush().unwrap();
                let t0 = Instant::now();
                let a = enumerate_semi_tier(&t, &limits).unwrap();
                print!(" closure: {} ({:.2?})", a.len(), t0.elapsed());
                std::io::stdout().flush().unwrap();
                let t1 = Instant::now();
                let b = enumerate_semi_tier_direct(&t, &limits).unwrap();
                println!(
                    "  direct: {} ({:.2?})  agree: {}",
                    b.len(), t1.elapsed(),
                    a.keys().eq(b.keys())
                );
            }
        }
    }
}
