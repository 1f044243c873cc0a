#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace threatgeo::baseline {

struct Lexicon {
    std::string domain_label = "energy";
    std::vector<std::string> phrases;  // unique, lowercase, non-blank
};

// One phrase per line, UTF-8, '#' starts a comment line. Throws on blank-only
// phrases or duplicates.
Lexicon load_lexicon(const std::filesystem::path& path, std::string domain_label = "energy");

Lexicon make_lexicon(std::vector<std::string> phrases, std::string domain_label = "energy");

// Multi-pattern matcher (Aho-Corasick over lowercased bytes) with whole-phrase
// word-boundary checks at both ends of every candidate occurrence. A boundary
// is the text edge or a transition between word and non-word bytes, so
// "energy" never matches inside "synergy".
class PhraseMatcher {
public:
    explicit PhraseMatcher(const Lexicon& lexicon);

    bool matches(std::string_view text) const;

private:
    struct Node {
        int next[256];
        int fail = 0;
        std::vector<int> match_lengths;
        Node() { for (int& n : next) n = -1; }
    };

    int child(int node, unsigned char c) const { return nodes_[node].next[c]; }

    std::vector<Node> nodes_;
};

// True iff at least one lexicon phrase occurs in the text, case-insensitively,
// on word boundaries. Pure function of its inputs.
bool classify(const Lexicon& lexicon, std::string_view text);

}  // namespace threatgeo::baseline
