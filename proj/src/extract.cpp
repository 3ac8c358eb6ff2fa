#include <algorithm>
#include <cctype>
#include <regex>
#include <string>
#include <vector>

#include "ccr/reasoner.hpp"

namespace ccr {

namespace {

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

// Curly quotes and markdown emphasis get in the way of word matching.
std::string normalise(const std::string& in) {
    std::string s;
    s.reserve(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
        const auto c = static_cast<unsigned char>(in[i]);
        if (c == 0xE2 && i + 2 < in.size() && static_cast<unsigned char>(in[i + 1]) == 0x80) {
            const auto d = static_cast<unsigned char>(in[i + 2]);
            if (d == 0x98 || d == 0x99) { s += '\''; i += 2; continue; }
            if (d == 0x9C || d == 0x9D) { s += '"'; i += 2; continue; }
        }
        if (c == '*' || c == '_' || c == '#' || c == '`') continue;
        s += static_cast<char>(std::tolower(c));
    }
    return s;
}

std::vector<std::string> sentences(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        const auto b = cur.find_first_not_of(" \t\r\"'-");
        if (b != std::string::npos) out.push_back(cur.substr(b));
        cur.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c == '\n') {
            flush();
            continue;
        }
        cur += c;
        if ((c == '.' || c == '!' || c == '?') &&
            (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1])) ||
             text[i + 1] == '"' || text[i + 1] == '\''))
            flush();
    }
    flush();
    return out;
}

std::string target_name(const std::string& question) {
    static const std::regex re(R"(\bis ([a-z][a-z0-9'-]*) happy\?)");
    std::string q = normalise(question), name;
    for (std::sregex_iterator it(q.begin(), q.end(), re), end; it != end; ++it) name = (*it)[1];
    return name;
}

// "yes, ..." / "no, ..." after an optional connective.
Verdict leading_verdict(std::string s) {
    static const std::regex prefix(
        R"(^(therefore|thus|hence|so|in conclusion|in summary|to conclude|overall|final answer|answer|the answer is|my answer is|the final answer is)\b[\s,:]*)");
    for (int guard = 0; guard < 4; ++guard) {
        std::smatch m;
        if (!std::regex_search(s, m, prefix)) break;
        s = m.suffix();
    }
    static const std::regex yes(R"(^yes\b)");
    static const std::regex no(R"(^no\b(?!\s+(matter|one|longer|more|other|doubt)))");
    if (std::regex_search(s, yes)) return Verdict::True;
    if (std::regex_search(s, no)) return Verdict::False;
    return Verdict::Unknown;
}

std::string escape_regex(const std::string& s) {
    static const std::regex special(R"([.^$|()\[\]{}*+?\\])");
    return std::regex_replace(s, special, R"(\$&)");
}

// "<name> is (not) happy" and close variants, skipping conditional clauses.
Verdict target_verdict(const std::string& s, const std::string& name) {
    if (name.empty()) return Verdict::Unknown;
    const std::regex re("\\b" + escape_regex(name) + "((?:\\s+[a-z']+){0,3}?)\\s+(un)?happy\\b");
    static const std::regex copula(R"(\b(is|be|remains|stays|was|becomes|isn't|wasn't|won't|wouldn't|can't|cannot|must|should)\b)");
    static const std::regex negation(R"(\b(not|never|no longer|isn't|wasn't|won't|wouldn't|can't|cannot)\b)");
    static const std::regex before_cond(R"((\bif|\bwhether|\bunless|\bwhen|\bthat)\s*$)");
    static const std::regex after_cond(R"(^\s*,?\s*(only if|if|unless|when|whenever|as long as|provided)\b)");
    Verdict v = Verdict::Unknown;
    for (std::sregex_iterator it(s.begin(), s.end(), re), end; it != end; ++it) {
        const auto& m = *it;
        const std::string middle = m[1];
        if (!std::regex_search(middle, copula)) continue;
        const std::string before = s.substr(0, static_cast<std::size_t>(m.position(0)));
        const std::string after = s.substr(static_cast<std::size_t>(m.position(0) + m.length(0)));
        if (std::regex_search(before, before_cond) || std::regex_search(after, after_cond)) continue;
        const bool neg = std::regex_search(middle, negation) != m[2].matched;
        v = neg ? Verdict::False : Verdict::True;
    }
    return v;
}

// Last affirmation or negation wins; longer phrases beat their own suffixes.
Verdict lexicon_verdict(std::string s) {
    // "is happy only if ..." states a condition, not a verdict
    static const std::regex conditioned(
        R"(\b(is|be|are)\s+(not\s+)?(un)?happy\s*,?\s*(only if|if|unless|whenever|when|as long as|provided)\b[^,;:]*)");
    static const std::regex conditional(R"(\b(only if|if|unless|whether|as long as)\b[^,;:]*)");
    s = std::regex_replace(s, conditioned, " ");
    s = std::regex_replace(s, conditional, " ");
    struct Phrase {
        std::regex re;
        Verdict v;
    };
    static const std::vector<Phrase> phrases = [] {
        std::vector<Phrase> p;
        for (const char* t : {R"(\byes\b)", R"(\btrue\b)", R"(\bcorrect\b)", R"(\bit holds\b)", R"(\bis happy\b)",
                              R"(\baffirmative\b)"})
            p.push_back({std::regex(t), Verdict::True});
        for (const char* f : {R"(\bno\b(?!\s+(matter|one|longer|more|other|doubt)))", R"(\bfalse\b)",
                              R"(\bincorrect\b)", R"(\bnot true\b)", R"(\bnot correct\b)", R"(\bdoes not hold\b)",
                              R"(\bdoesn't hold\b)", R"(\bnot happy\b)", R"(\bunhappy\b)", R"(\bisn't happy\b)",
                              R"(\bnegative\b)"})
            p.push_back({std::regex(f), Verdict::False});
        return p;
    }();
    long best_end = -1, best_len = -1;
    Verdict v = Verdict::Unknown;
    for (const auto& p : phrases) {
        for (std::sregex_iterator it(s.begin(), s.end(), p.re), end; it != end; ++it) {
            const long e = static_cast<long>(it->position(0) + it->length(0));
            const long len = static_cast<long>(it->length(0));
            if (e > best_end || (e == best_end && len > best_len)) {
                best_end = e;
                best_len = len;
                v = p.v;
            }
        }
    }
    return v;
}

Verdict parse_fallback_reply(const std::string& reply) {
    const std::string r = lower(reply);
    const bool t = r.find("true") != std::string::npos;
    const bool f = r.find("false") != std::string::npos;
    if (t && !f) return Verdict::True;
    if (f && !t) return Verdict::False;
    return Verdict::Unknown;
}

} // namespace

std::string extraction_prompt(const std::string& question, const std::string& answer) {
    return "I will give you a question and its answer. Determine whether the meaning of the answer is 'TRUE' "
           "or 'FALSE'. An answer is 'TRUE' if it contains phrases like 'yes', 'it holds', 'correct', 'true', "
           "or similar affirmations. An answer is 'FALSE' if it contains phrases like 'no', 'it does not "
           "hold', 'incorrect', 'false', or similar negations. Respond only with one word: 'TRUE' or 'FALSE'. "
           "Question: '" +
           question + "' Answer: '" + answer + "' Is the meaning 'TRUE' or 'FALSE'?";
}

Verdict extract_boolean(const std::string& question, const std::string& answer,
                        const ExtractionFallback& fallback) {
    const std::string name = target_name(question);
    const auto parts = sentences(normalise(answer));
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
        if (auto v = leading_verdict(*it); v != Verdict::Unknown) return v;
        if (auto v = target_verdict(*it, name); v != Verdict::Unknown) return v;
        if (auto v = lexicon_verdict(*it); v != Verdict::Unknown) return v;
    }
    if (fallback) return parse_fallback_reply(fallback(extraction_prompt(question, answer)));
    return Verdict::Unknown;
}

} // namespace ccr
