//! Small Hindi pronoun lexicon used to fill in syntactic flags that a corpus
//! file leaves out. Values present in the file always win.

use unicode_normalization::UnicodeNormalization;

/// First-person personal and possessive forms.
pub const FIRST_PERSON: &[&str] = &[
    "मैं",
    "मैंने",
    "मुझे",
    "मुझको",
    "मुझसे",
    "मेरा",
    "मेरी",
    "मेरे",
    "हम",
    "हमने",
    "हमें",
    "हमको",
    "हमसे",
    "हमारा",
    "हमारी",
    "हमारे",
];

/// Second- and third-person, demonstrative, reflexive and relative forms.
pub const OTHER_PRONOUNS: &[&str] = &[
    "तू",
    "तुम",
    "तुमने",
    "तुम्हें",
    "तुम्हारा",
    "तुम्हारी",
    "तुम्हारे",
    "आप",
    "आपने",
    "आपको",
    "आपका",
    "आपकी",
    "आपके",
    "वह",
    "वे",
    "वो",
    "यह",
    "ये",
    "उस",
    "उसे",
    "उसने",
    "उसको",
    "उसका",
    "उसकी",
    "उसके",
    "उन",
    "उन्हें",
    "उन्होंने",
    "उनका",
    "उनकी",
    "उनके",
    "इस",
    "इसे",
    "इसने",
    "इसका",
    "इसकी",
    "इसके",
    "इन",
    "इन्हें",
    "इन्होंने",
    "इनका",
    "इनकी",
    "इनके",
    "अपना",
    "अपनी",
    "अपने",
    "खुद",
    "स्वयं",
    "जो",
    "जिस",
    "जिसे",
    "जिसका",
    "जिसकी",
    "जिसके",
    "जिन",
    "कोई",
    "कुछ",
];

fn contains(list: &[&str], word: &str) -> bool {
    let word: String = word.nfc().collect();
    list.iter().any(|p| p.nfc().eq(word.chars()))
}

pub fn is_first_person(word: &str) -> bool {
    contains(FIRST_PERSON, word)
}

pub fn is_pronoun(word: &str) -> bool {
    is_first_person(word) || contains(OTHER_PRONOUNS, word)
}
