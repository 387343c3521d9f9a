//! Seeded split, logistic fit and a finite-difference check of the gradient.

use fairgate::model::{Dataset, Record};
use fairgate::scorer::{fit, loss_and_gradient, split, FitConfig};

fn main() -> fairgate::Result<()> {
    let mut records = Vec::new();
    for i in 0..120 {
        let x = ((i * 37 % 100) as f64 - 50.0) / 25.0;
        let z = (i * 13 % 17) as f64 / 8.0 - 1.0;
        let y = u8::from(x + 0.5 * z + ((i * 29 % 7) as f64 - 3.0) / 3.0 > 0.0);
        let g = if i % 3 == 0 { "a" } else { "b" };
        records.push(Record::new(i.to_string(), None, y, g)?.with_feature("x", x).with_feature("z", z));
    }
    let ds = Dataset::new(records, vec![], vec!["x".into(), "z".into()])?;
    let (train, test) = split(&ds, 2.0 / 3.0, 42)?;
    let model = fit(&train, &FitConfig::default())?;
    println!("weights {:?}", model.weights);
    let scored = model.score_dataset(&test)?;
    let correct = scored.records().iter().filter(|r| u8::from(r.score.unwrap() >= 0.5) == r.label).count();
    println!("test accuracy {:.3} on {} records", correct as f64 / test.len() as f64, test.len());

    let x = vec![vec![0.3, -1.2], vec![1.5, 0.4], vec![-0.7, 0.9]];
    let y = vec![1.0, 0.0, 1.0];
    let w = vec![0.1, -0.4, 0.25];
    let (_, grad) = loss_and_gradient(&w, &x, &y, 0.01);
    let h = 1e-6;
    for j in 0..w.len() {
        let (mut up, mut down) = (w.clone(), w.clone());
        up[j] += h;
        down[j] -= h;
        let fd = (loss_and_gradient(&up, &x, &y, 0.01).0 - loss_and_gradient(&down, &x, &y, 0.01).0) / (2.0 * h);
        println!("dL/dw{j}: analytic {:.8} numeric {:.8}", grad[j], fd);
    }
    Ok(())
}
