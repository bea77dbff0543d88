#include "emomap/lexicon.hpp"

#include <algorithm>
#include <fstream>

#include "emomap/csv.hpp"
#include "emomap/error.hpp"
#include "emomap/text.hpp"

namespace emomap {

double tier_score(Tier tier) {
    switch (tier) {
        case Tier::extreme: return 1.0;
        case Tier::high: return 0.8;
        case Tier::moderate: return 0.6;
        case Tier::mild: return 0.3;
    }
    return 0.0;
}

std::string_view tier_name(Tier tier) {
    switch (tier) {
        case Tier::extreme: return "extreme";
        case Tier::high: return "high";
        case Tier::moderate: return "moderate";
        case Tier::mild: return "mild";
    }
    return "";
}

void Lexicon::check_new(const std::string& word) const {
    if (word.empty()) throw ValidationError("lexicon: empty word");
    if (word != text::to_lower(word)) throw ValidationError("lexicon: word '" + word + "' is not lowercase");
    if (entries_.count(word) || intensifiers_.count(word) || absolutists_.count(word)) {
        throw ValidationError("lexicon: duplicate word '" + word + "'");
    }
}

void Lexicon::add_word(std::string word, Tier tier) {
    check_new(word);
    entries_.emplace(std::move(word), tier);
}

void Lexicon::add_intensifier(std::string word) {
    check_new(word);
    intensifiers_.insert(std::move(word));
}

void Lexicon::add_absolutist(std::string word) {
    check_new(word);
    absolutists_.insert(std::move(word));
}

double Lexicon::score(std::string_view word) const {
    auto it = entries_.find(word);
    return it == entries_.end() ? 0.0 : tier_score(it->second);
}

bool Lexicon::is_intensifier(std::string_view word) const { return intensifiers_.find(word) != intensifiers_.end(); }

bool Lexicon::is_absolutist(std::string_view word) const { return absolutists_.find(word) != absolutists_.end(); }

Lexicon Lexicon::defaults() {
    Lexicon lex;
    for (auto w : {"devastated", "euphoric", "depressed", "extremely"}) lex.add_word(w, Tier::extreme);
    for (auto w : {"amazing", "hate", "terrible"}) lex.add_word(w, Tier::high);
    for (auto w : {"love", "sad", "happy"}) lex.add_word(w, Tier::moderate);
    for (auto w : {"nice", "bad", "okay"}) lex.add_word(w, Tier::mild);
    for (auto w : {"so", "very", "really", "truly", "completely", "totally"}) lex.add_intensifier(w);
    for (auto w : {"never", "always", "everything", "nothing"}) lex.add_absolutist(w);
    return lex;
}

Lexicon load_lexicon(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open lexicon '" + path + "'");
    csv::Reader reader(in);
    Lexicon lex;
    bool header_seen = false;
    while (auto rec = reader.next()) {
        if (!rec->fields.empty() && text::trim(rec->fields[0]).substr(0, 1) == "#") continue;
        if (rec->malformed) {
            throw ParseError(path + ":" + std::to_string(rec->line) + ": " + rec->problem);
        }
        if (!header_seen) {
            if (rec->fields.size() != 2 || text::trim(rec->fields[0]) != "word" ||
                text::trim(rec->fields[1]) != "tier") {
                throw ParseError(path + ":" + std::to_string(rec->line) + ": expected header 'word,tier'");
            }
            header_seen = true;
            continue;
        }
        if (rec->fields.size() != 2) {
            throw ParseError(path + ":" + std::to_string(rec->line) + ": expected 2 fields");
        }
        const std::string word = text::to_lower(text::trim(rec->fields[0]));
        const std::string tier(text::trim(rec->fields[1]));
        if (word.find_first_of(" \t") != std::string::npos) {
            throw ParseError(path + ":" + std::to_string(rec->line) + ": multi-word entry '" + word +
                             "' is not supported");
        }
        try {
            if (tier == "extreme") lex.add_word(word, Tier::extreme);
            else if (tier == "high") lex.add_word(word, Tier::high);
            else if (tier == "moderate") lex.add_word(word, Tier::moderate);
            else if (tier == "mild") lex.add_word(word, Tier::mild);
            else if (tier == "intensifier") lex.add_intensifier(word);
            else if (tier == "absolutist") lex.add_absolutist(word);
            else throw ParseError(path + ":" + std::to_string(rec->line) + ": unknown tier '" + tier + "'");
        } catch (const ValidationError& e) {
            throw ValidationError(path + ":" + std::to_string(rec->line) + ": " + e.what());
        }
    }
    return lex;
}

void save_lexicon(const Lexicon& lex, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write lexicon '" + path + "'");
    out << "word,tier\n";
    for (const auto& [word, tier] : lex.entries()) out << word << ',' << tier_name(tier) << '\n';
    for (const auto& w : lex.intensifiers()) out << w << ",intensifier\n";
    for (const auto& w : lex.absolutists()) out << w << ",absolutist\n";
    if (!out) throw IoError("write failure on '" + path + "'");
}

bool is_shouting(std::string_view text) {
    bool cased = false;
    for (char ch : text) {
        if (ch >= 'a' && ch <= 'z') return false;
        if (ch >= 'A' && ch <= 'Z') cased = true;
    }
    return cased && text::utf8_length(text) > 3;
}

IntensityScore score_intensity(std::string_view text, const Lexicon& lex, const ScoringOptions& opts) {
    IntensityComponents c;
    c.base = kBaseIntensity;

    int intensifiers = 0;
    int absolutists = 0;
    for (const auto& w : text::word_tokens(text)) {
        c.lexical += lex.score(w);
        if (lex.is_intensifier(w)) ++intensifiers;
        if (lex.is_absolutist(w)) ++absolutists;
    }
    if (opts.modifiers == ModifierMode::flat) {
        c.intensifier = intensifiers > 0 ? kIntensifierBonus : 0.0;
        c.absolutist = absolutists > 0 ? kAbsolutistBonus : 0.0;
    } else {
        c.intensifier = kIntensifierBonus * intensifiers;
        c.absolutist = kAbsolutistBonus * absolutists;
    }

    const auto bangs = std::count(text.begin(), text.end(), '!');
    const auto questions = std::count(text.begin(), text.end(), '?');
    c.exclamation = kExclamationBonus * static_cast<double>(std::min<long>(bangs, kMaxExclamations));
    c.question = kQuestionBonus * static_cast<double>(std::min<long>(questions, kMaxQuestions));
    c.allcaps = is_shouting(text) ? kAllCapsBonus : 0.0;

    return {std::min(c.sum(), kMaxIntensity), c};
}

}  // namespace emomap
