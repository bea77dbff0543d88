#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>

namespace emomap {

/// Intensity tiers of the keyword lexicon.
enum class Tier { extreme, high, moderate, mild };

double tier_score(Tier tier);
std::string_view tier_name(Tier tier);

/// Keyword lexicon with two modifier word classes. All words are lowercase;
/// a word appears in at most one of the three collections.
class Lexicon {
public:
    Lexicon() = default;

    /// Throws ValidationError if the word is already present anywhere.
    void add_word(std::string word, Tier tier);
    void add_intensifier(std::string word);
    void add_absolutist(std::string word);

    /// Tier score for a lowercase word, 0 when absent.
    double score(std::string_view word) const;
    bool is_intensifier(std::string_view word) const;
    bool is_absolutist(std::string_view word) const;

    const std::map<std::string, Tier, std::less<>>& entries() const { return entries_; }
    const std::set<std::string, std::less<>>& intensifiers() const { return intensifiers_; }
    const std::set<std::string, std::less<>>& absolutists() const { return absolutists_; }

    bool empty() const { return entries_.empty() && intensifiers_.empty() && absolutists_.empty(); }

    /// Exemplar lexicon: every word the method description lists per tier,
    /// the six intensifiers and the four absolutist terms.
    static Lexicon defaults();

private:
    void check_new(const std::string& word) const;

    std::map<std::string, Tier, std::less<>> entries_;
    std::set<std::string, std::less<>> intensifiers_;
    std::set<std::string, std::less<>> absolutists_;
};

/// Reads a lexicon CSV.
///
/// Format: header `word,tier`; tier is one of extreme, high, moderate, mild,
/// intensifier, absolutist. Lines starting with '#' are comments. Entries
/// containing whitespace are reserved for phrase support and rejected.
/// Throws ParseError on an unknown tier or malformed line and
/// ValidationError naming the word on a duplicate.
Lexicon load_lexicon(const std::string& path);

/// Writes `lex` in the format accepted by load_lexicon.
void save_lexicon(const Lexicon& lex, const std::string& path);

enum class ModifierMode {
    flat,           // +0.3 / +0.2 once when any intensifier / absolutist occurs
    per_occurrence  // +0.3 / +0.2 for every occurrence
};

struct ScoringOptions {
    ModifierMode modifiers = ModifierMode::flat;
};

/// Additive breakdown of an intensity score.
struct IntensityComponents {
    double base = 0.0;
    double lexical = 0.0;
    double intensifier = 0.0;
    double absolutist = 0.0;
    double exclamation = 0.0;
    double question = 0.0;
    double allcaps = 0.0;

    double sum() const {
        return base + lexical + intensifier + absolutist + exclamation + question + allcaps;
    }
};

struct IntensityScore {
    double value = 0.0;  // min(components.sum(), kMaxIntensity)
    IntensityComponents components;
};

inline constexpr double kBaseIntensity = 0.1;
inline constexpr double kMaxIntensity = 2.0;
inline constexpr double kIntensifierBonus = 0.3;
inline constexpr double kAbsolutistBonus = 0.2;
inline constexpr double kExclamationBonus = 0.25;
inline constexpr int kMaxExclamations = 4;
inline constexpr double kQuestionBonus = 0.15;
inline constexpr int kMaxQuestions = 3;
inline constexpr double kAllCapsBonus = 0.5;

/// True when the text has at least one ASCII letter, no lowercase ASCII
/// letter, and more than three code points.
bool is_shouting(std::string_view text);

IntensityScore score_intensity(std::string_view text, const Lexicon& lex,
                               const ScoringOptions& opts = {});

}  // namespace emomap
