//! Closed vocabulary for the synthetic grammar.

use std::collections::HashMap;
use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Number {
    Singular,
    Plural,
}

impl Number {
    pub fn flip(self) -> Self {
        match self {
            Number::Singular => Number::Plural,
            Number::Plural => Number::Singular,
        }
    }
}

/// Coarse word class, used to decide which corruptions apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pos {
    Det,
    Noun,
    Verb,
    Adj,
    Prep,
    Adv,
    Pron,
    Expletive,
    Punct,
}

/// (singular, plural)
pub const NOUNS: &[(&str, &str)] = &[
    ("cat", "cats"),
    ("dog", "dogs"),
    ("teacher", "teachers"),
    ("student", "students"),
    ("book", "books"),
    ("house", "houses"),
    ("car", "cars"),
    ("friend", "friends"),
    ("doctor", "doctors"),
    ("bird", "birds"),
    ("garden", "gardens"),
    ("letter", "letters"),
    ("table", "tables"),
    ("window", "windows"),
    ("child", "children"),
    ("woman", "women"),
    ("man", "men"),
    ("city", "cities"),
    ("river", "rivers"),
    ("song", "songs"),
    ("picture", "pictures"),
    ("computer", "computers"),
    ("neighbour", "neighbours"),
    ("farmer", "farmers"),
    ("boat", "boats"),
    ("shop", "shops"),
    ("bag", "bags"),
    ("film", "films"),
    ("key", "keys"),
    ("horse", "horses"),
    ("apple", "apples"),
    ("egg", "eggs"),
    ("owl", "owls"),
    ("umbrella", "umbrellas"),
    ("idea", "ideas"),
    ("elephant", "elephants"),
    ("artist", "artists"),
    ("engineer", "engineers"),
    ("island", "islands"),
    ("office", "offices"),
];

/// (third person singular, plural)
pub const INTRANSITIVE: &[(&str, &str)] = &[
    ("sleeps", "sleep"),
    ("runs", "run"),
    ("waits", "wait"),
    ("smiles", "smile"),
    ("arrives", "arrive"),
    ("laughs", "laugh"),
    ("works", "work"),
    ("sings", "sing"),
    ("swims", "swim"),
    ("travels", "travel"),
    ("stays", "stay"),
    ("falls", "fall"),
];

pub const TRANSITIVE: &[(&str, &str)] = &[
    ("sees", "see"),
    ("likes", "like"),
    ("wants", "want"),
    ("finds", "find"),
    ("needs", "need"),
    ("buys", "buy"),
    ("helps", "help"),
    ("visits", "visit"),
    ("reads", "read"),
    ("paints", "paint"),
    ("loves", "love"),
    ("carries", "carry"),
    ("has", "have"),
];

/// Nouns whose singular and plural coincide; used where number must stay
/// uninformative.
pub const NEUTRAL_NOUNS: &[&str] = &[
    "sheep", "fish", "deer", "aircraft", "salmon", "moose", "bison", "trout", "swine", "series",
];

/// Determiners that mark number on their own.
pub const MARKED_SINGULAR_DETS: &[&str] = &["this", "that", "a", "every"];
pub const MARKED_PLURAL_DETS: &[&str] = &["these", "those", "many", "several"];

/// Determiners compatible with either number.
pub const NEUTRAL_DETS: &[&str] = &["the", "my", "their", "our", "his", "her", "your"];

pub const BE: &[(&str, &str)] = &[("is", "are"), ("was", "were")];

pub const ADJECTIVES: &[&str] = &[
    "big", "small", "red", "happy", "quiet", "tall", "young", "cold", "new", "green", "busy",
    "clever", "lazy", "brown", "famous", "strange", "old", "angry", "easy", "early", "elegant",
    "ugly", "empty", "orange", "enormous",
];

pub const PREPOSITIONS: &[&str] = &["in", "on", "with", "near", "under", "behind", "from", "at"];

pub const ADVERBS: &[&str] = &[
    "quickly", "quietly", "today", "often", "again", "slowly", "happily", "now",
];

pub const SINGULAR_PRONOUNS: &[&str] = &["he", "she", "it"];
pub const PLURAL_PRONOUNS: &[&str] = &["they", "we"];

pub const SINGULAR_DETS: &[&str] = &["the", "a", "this", "that", "my", "their"];
pub const PLURAL_DETS: &[&str] = &["the", "these", "those", "some", "my", "their"];

/// Words a learner might write for one another; replacements are always
/// ungrammatical in the generated contexts.
pub const CONFUSABLES: &[(&str, &str)] = &[("a", "an"), ("an", "a"), ("their", "there"), ("there", "their")];

/// Tokens used for spurious insertions.
pub const SPURIOUS: &[&str] = &["the", "a", "to", "of", "is"];

pub fn starts_with_vowel(word: &str) -> bool {
    word.starts_with(['a', 'e', 'i', 'o', 'u'])
}

/// Indefinite article for the following word.
pub fn indefinite(next: &str) -> &'static str {
    if starts_with_vowel(next) {
        "an"
    } else {
        "a"
    }
}

/// Reverse lookups over the closed vocabulary.
#[derive(Debug)]
pub struct Lexicon {
    nouns: HashMap<&'static str, Number>,
    verbs: HashMap<&'static str, (Number, &'static str)>,
}

impl Lexicon {
    pub fn get() -> &'static Lexicon {
        static LEX: OnceLock<Lexicon> = OnceLock::new();
        LEX.get_or_init(|| {
            let mut nouns = HashMap::new();
            for &(s, p) in NOUNS {
                nouns.insert(s, Number::Singular);
                nouns.insert(p, Number::Plural);
            }
            let mut verbs = HashMap::new();
            for &(s, p) in INTRANSITIVE.iter().chain(TRANSITIVE).chain(BE) {
                verbs.insert(s, (Number::Singular, p));
                verbs.insert(p, (Number::Plural, s));
            }
            Lexicon { nouns, verbs }
        })
    }

    pub fn noun_number(&self, word: &str) -> Option<Number> {
        self.nouns.get(word).copied()
    }

    /// Agreement class of a finite verb form.
    pub fn verb_number(&self, word: &str) -> Option<Number> {
        self.verbs.get(word).map(|v| v.0)
    }

    /// The same verb with the other agreement.
    pub fn other_verb_form(&self, word: &str) -> Option<&'static str> {
        self.verbs.get(word).map(|v| v.1)
    }

    pub fn is_verb(&self, word: &str) -> bool {
        self.verbs.contains_key(word)
    }

    /// Number of distinct surface forms in the lexicon.
    pub fn size() -> usize {
        let mut all: Vec<&str> = Vec::new();
        for &(a, b) in NOUNS.iter().chain(INTRANSITIVE).chain(TRANSITIVE).chain(BE) {
            all.extend([a, b]);
        }
        all.extend(ADJECTIVES);
        all.extend(PREPOSITIONS);
        all.extend(ADVERBS);
        all.extend(SINGULAR_PRONOUNS);
        all.extend(PLURAL_PRONOUNS);
        all.extend(SINGULAR_DETS);
        all.extend(PLURAL_DETS);
        all.extend(NEUTRAL_NOUNS);
        all.extend(NEUTRAL_DETS);
        all.extend(MARKED_SINGULAR_DETS);
        all.extend(MARKED_PLURAL_DETS);
        all.extend(["an", "there", "to", "of", "."]);
        all.sort_unstable();
        all.dedup();
        all.len()
    }
}
