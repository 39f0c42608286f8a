// Build a field, measure it, and round-trip it through both storage formats.

use kdvlab::spectral::{linear_birkhoff, Field};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let u = Field::from_pairs(vec![[0.02, -0.01], [0.004, 0.0], [0.0, 5e-4]])?;
    println!("||u||_0 = {:.6}  ||u||_3 = {:.6}", u.sobolev_norm(0.0), u.sobolev_norm(3.0));
    println!("u(0.25) = {:.6}", u.eval(0.25));

    let v = linear_birkhoff(&u);
    for (k, pair) in v.modes().iter().enumerate() {
        println!("mode {}: linearised Birkhoff coordinates {:?}", k + 1, pair);
    }

    let json = u.to_json_string();
    let frame = u.to_frame();
    assert_eq!(Field::from_json_str(&json)?, u);
    assert_eq!(Field::from_frame(&frame)?, u);
    println!("json: {json}");
    println!("binary frame: {} bytes", frame.len());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
