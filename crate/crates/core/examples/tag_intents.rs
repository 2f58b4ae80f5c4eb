//! Part-of-speech tags from the built-in lexicon tagger, with and without a
//! mined vocabulary.

use perturbe::postag::{tag, Lexicon, LexiconTagger};
use perturbe::preprocess::tokenize;
use perturbe::vocab::{RegisterList, Vocabulary};

fn main() {
    let plain = LexiconTagger::new(Lexicon::shipped(), RegisterList::default());
    let vocab = Vocabulary::from_words(["register", "byte"], ["ESI", "EAX"]);
    let aware = LexiconTagger::new(Lexicon::shipped(), RegisterList::default()).with_vocabulary(&vocab);

    for intent in [
        "Store the pointer to shellcode in the ESI register",
        "Push the byte at [esi] onto the stack",
        "Decrement the counter and jump to decode if not zero",
    ] {
        let tokens = tokenize(intent).tokens;
        for (name, tagger) in [("plain", &plain), ("vocab", &aware)] {
            let tags = tag(&tokens, tagger);
            let line: Vec<String> = tokens.iter().zip(&tags).map(|(t, g)| format!("{t}/{}", g.as_str())).collect();
            println!("{name}: {}", line.join(" "));
        }
        println!();
    }
}
