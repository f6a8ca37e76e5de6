use csk_probe::eval_metrics::{self, EvalRecord};
use csk_probe::probe_builder::DatasetTag;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn records(ranks: &[Option<usize>]) -> Vec<EvalRecord> {
    ranks.iter().enumerate().map(|(i, &r)| EvalRecord::from_rank(format!("p{i}"), r, DatasetTag::Cslb)).collect()
}

fn main() -> csk_probe::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let base: Vec<Option<usize>> = (0..300).map(|_| rng.random_bool(0.7).then(|| rng.random_range(1..20))).collect();
    let better: Vec<Option<usize>> = base.iter().map(|r| r.map(|k| k.div_ceil(2)).or(Some(15))).collect();
    let (a, b) = (records(&base), records(&better));
    for (name, other) in [("identical", &a), ("improved", &b)] {
        let p = eval_metrics::paired_significance(&a, other, 10_000, 42)?;
        println!("{name}\tp={p:.4}");
    }
    Ok(())
}
