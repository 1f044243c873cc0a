#include "threatgeo/baseline.hpp"

#include <deque>
#include <fstream>
#include <set>
#include <stdexcept>

#include "threatgeo/util.hpp"

namespace threatgeo::baseline {

Lexicon make_lexicon(std::vector<std::string> phrases, std::string domain_label) {
    Lexicon lex;
    lex.domain_label = std::move(domain_label);
    std::set<std::string> seen;
    for (auto& p : phrases) {
        std::string norm = util::lower_ascii(util::collapse_ws(p));
        if (norm.empty()) throw std::invalid_argument("lexicon phrase is blank");
        if (!seen.insert(norm).second) {
            throw std::invalid_argument("duplicate lexicon phrase: " + norm);
        }
        lex.phrases.push_back(std::move(norm));
    }
    return lex;
}

Lexicon load_lexicon(const std::filesystem::path& path, std::string domain_label) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read lexicon: " + path.string());
    std::vector<std::string> phrases;
    std::string line;
    while (std::getline(in, line)) {
        std::string t = util::trim(line);
        if (t.empty() || t[0] == '#') continue;
        phrases.push_back(std::move(t));
    }
    return make_lexicon(std::move(phrases), std::move(domain_label));
}

PhraseMatcher::PhraseMatcher(const Lexicon& lexicon) {
    nodes_.emplace_back();  // root
    for (const auto& phrase : lexicon.phrases) {
        int node = 0;
        for (unsigned char c : phrase) {
            if (nodes_[node].next[c] < 0) {
                nodes_[node].next[c] = static_cast<int>(nodes_.size());
                nodes_.emplace_back();
            }
            node = nodes_[node].next[c];
        }
        nodes_[node].match_lengths.push_back(static_cast<int>(phrase.size()));
    }

    // BFS failure links; merge output sets along the links.
    std::deque<int> queue;
    for (int c = 0; c < 256; ++c) {
        int v = nodes_[0].next[c];
        if (v < 0) {
            nodes_[0].next[c] = 0;
        } else {
            nodes_[v].fail = 0;
            queue.push_back(v);
        }
    }
    while (!queue.empty()) {
        int u = queue.front();
        queue.pop_front();
        for (int c = 0; c < 256; ++c) {
            int v = nodes_[u].next[c];
            if (v < 0) {
                nodes_[u].next[c] = nodes_[nodes_[u].fail].next[c];
            } else {
                int f = nodes_[nodes_[u].fail].next[c];
                nodes_[v].fail = f;
                for (int len : nodes_[f].match_lengths) nodes_[v].match_lengths.push_back(len);
                queue.push_back(v);
            }
        }
    }
}

bool PhraseMatcher::matches(std::string_view text) const {
    if (nodes_.size() == 1) return false;
    int node = 0;
    const size_t n = text.size();
    for (size_t i = 0; i < n; ++i) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
        node = nodes_[node].next[c];
        for (int len : nodes_[node].match_lengths) {
            size_t start = i + 1 - static_cast<size_t>(len);
            bool left_ok = start == 0 || !util::is_word_byte(static_cast<unsigned char>(text[start - 1]));
            bool right_ok = i + 1 == n || !util::is_word_byte(static_cast<unsigned char>(text[i + 1]));
            if (left_ok && right_ok) return true;
        }
    }
    return false;
}

bool classify(const Lexicon& lexicon, std::string_view text) {
    return PhraseMatcher(lexicon).matches(text);
}

}  // namespace threatgeo::baseline
