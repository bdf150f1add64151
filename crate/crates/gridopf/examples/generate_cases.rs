//! Regenerate the sample instance files under cases/.
//!
//! Usage: cargo run -p gridopf --example generate_cases -- [DIR]

use gridopf::io::write_instance;
use gridopf::samples;

fn main() -> std::io::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "cases".into());
    std::fs::create_dir_all(&dir)?;
    let cases = [
        ("ring3.json", samples::three_gen_ring()),
        ("five_bus.json", samples::five_bus()),
        ("reserve_scarce.json", samples::reserve_scarce()),
        ("random12.json", samples::random_network(5, 12, 3)),
    ];
    for (name, net) in cases {
        assert!(net.validate().is_empty());
        let path = format!("{dir}/{name}");
        std::fs::write(&path, write_instance(&net, 100.0))?;
        println!("wrote {path}");
    }
    Ok(())
}
