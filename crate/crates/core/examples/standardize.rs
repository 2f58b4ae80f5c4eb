//! Tokenize an intent, drop stopwords, and replace names with `var#`
//! placeholders; then map a generated snippet back to the original names.

use perturbe::preprocess::{destandardize, filter_stopwords, standardize, tokenize, Stopwords};

fn main() -> perturbe::Result<()> {
    let intent = "Move the value of the counter variable into the EAX register";
    let tokens = tokenize(intent);
    println!("tokens:    {:?}", tokens.tokens);

    let filtered = filter_stopwords(&tokens, &Stopwords::default_english());
    println!("content:   {:?}", filtered.kept.tokens);

    let intent = "Jump to the label loop_start if the zero flag is set";
    let (std_intent, map) = standardize(&tokenize(intent));
    println!("standard:  {}", std_intent.joined());
    for (i, name) in map.entries() {
        println!("  var{i} = {name}");
    }
    let generated = "jz var0";
    println!("restored:  {}", destandardize(generated, &map)?);
    Ok(())
}
