// Parse the two-area scenario, write it back out and parse it again.

use std::path::Path;

use sfcosim::scenario::{digest, parse, parse_file, serialize};

/// Canonical text and digest; fails if the round trip changes anything.
pub fn run() -> sfcosim::Result<(String, String)> {
    let sc = parse_file(&Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/two_area.scn"))?;
    let text = serialize(&sc);
    let again = parse(&text)?;
    assert_eq!(sc, again, "round trip changed the scenario");
    Ok((text, digest(&sc)))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (text, digest) = run()?;
    print!("{text}");
    println!("# digest {digest}");
    Ok(())
}
