#include "tagforge/stemmer.hpp"

#include <array>
#include <string_view>

namespace tagforge {

namespace {

bool is_cons(const std::string& w, std::size_t i) {
  switch (w[i]) {
    case 'a':
    case 'e':
    case 'i':
    case 'o':
    case 'u':
      return false;
    case 'y':
      // y after a consonant acts as a vowel
      return i == 0 ? true : !is_cons(w, i - 1);
    default:
      return true;
  }
}

// m = number of VC sequences in [C](VC)^m[V].
int measure(const std::string& w) {
  std::size_t i = 0;
  const std::size_t n = w.size();
  while (i < n && is_cons(w, i)) ++i;
  int m = 0;
  while (i < n) {
    while (i < n && !is_cons(w, i)) ++i;
    if (i == n) break;
    ++m;
    while (i < n && is_cons(w, i)) ++i;
  }
  return m;
}

bool has_vowel(const std::string& w) {
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!is_cons(w, i)) return true;
  }
  return false;
}

// *d: ends with a double consonant.
bool ends_double_cons(const std::string& w) {
  const std::size_t n = w.size();
  return n >= 2 && w[n - 1] == w[n - 2] && is_cons(w, n - 1);
}

// *o: ends cvc where the final consonant is not w, x or y.
bool ends_cvc(const std::string& w) {
  const std::size_t n = w.size();
  if (n < 3) return false;
  if (!is_cons(w, n - 3) || is_cons(w, n - 2) || !is_cons(w, n - 1)) return false;
  const char c = w[n - 1];
  return c != 'w' && c != 'x' && c != 'y';
}

bool ends_with(const std::string& w, std::string_view suffix) {
  return w.size() >= suffix.size() &&
         std::string_view(w).substr(w.size() - suffix.size()) == suffix;
}

struct Rule {
  std::string_view suffix;
  std::string_view replacement;
};

// Takes the longest matching suffix, then applies it only if the stem's
// measure exceeds min_m. Per the algorithm, a failed condition ends the step;
// shorter suffixes are not retried.
bool replace_longest(std::string& w, const Rule* rules, std::size_t count, int min_m) {
  const Rule* best = nullptr;
  for (std::size_t i = 0; i < count; ++i) {
    if (ends_with(w, rules[i].suffix) &&
        (best == nullptr || rules[i].suffix.size() > best->suffix.size())) {
      best = &rules[i];
    }
  }
  if (best == nullptr) return false;
  std::string stem = w.substr(0, w.size() - best->suffix.size());
  if (measure(stem) > min_m) {
    w = stem + std::string(best->replacement);
    return true;
  }
  return false;
}

void step1a(std::string& w) {
  if (ends_with(w, "sses")) {
    w.erase(w.size() - 2);
  } else if (ends_with(w, "ies")) {
    w.erase(w.size() - 2);
  } else if (ends_with(w, "ss")) {
    // unchanged
  } else if (ends_with(w, "s")) {
    w.pop_back();
  }
}

void step1b(std::string& w) {
  if (ends_with(w, "eed")) {
    if (measure(w.substr(0, w.size() - 3)) > 0) w.pop_back();
    return;
  }
  bool stripped = false;
  if (ends_with(w, "ed") && has_vowel(w.substr(0, w.size() - 2))) {
    w.erase(w.size() - 2);
    stripped = true;
  } else if (ends_with(w, "ing") && has_vowel(w.substr(0, w.size() - 3))) {
    w.erase(w.size() - 3);
    stripped = true;
  }
  if (!stripped) return;
  if (ends_with(w, "at") || ends_with(w, "bl") || ends_with(w, "iz")) {
    w.push_back('e');
  } else if (ends_double_cons(w) && !ends_with(w, "l") && !ends_with(w, "s") &&
             !ends_with(w, "z")) {
    w.pop_back();
  } else if (measure(w) == 1 && ends_cvc(w)) {
    w.push_back('e');
  }
}

void step1c(std::string& w) {
  if (ends_with(w, "y") && has_vowel(w.substr(0, w.size() - 1))) {
    w.back() = 'i';
  }
}

void step2(std::string& w) {
  static constexpr std::array<Rule, 20> rules = {{{"ational", "ate"}, {"tional", "tion"},
                                                  {"enci", "ence"},   {"anci", "ance"},
                                                  {"izer", "ize"},    {"abli", "able"},
                                                  {"alli", "al"},     {"entli", "ent"},
                                                  {"eli", "e"},       {"ousli", "ous"},
                                                  {"ization", "ize"}, {"ation", "ate"},
                                                  {"ator", "ate"},    {"alism", "al"},
                                                  {"iveness", "ive"}, {"fulness", "ful"},
                                                  {"ousness", "ous"}, {"aliti", "al"},
                                                  {"iviti", "ive"},   {"biliti", "ble"}}};
  replace_longest(w, rules.data(), rules.size(), 0);
}

void step3(std::string& w) {
  static constexpr std::array<Rule, 7> rules = {{{"icate", "ic"},
                                                 {"ative", ""},
                                                 {"alize", "al"},
                                                 {"iciti", "ic"},
                                                 {"ical", "ic"},
                                                 {"ful", ""},
                                                 {"ness", ""}}};
  replace_longest(w, rules.data(), rules.size(), 0);
}

void step4(std::string& w) {
  static constexpr std::array<Rule, 18> rules = {{{"al", ""},    {"ance", ""}, {"ence", ""},
                                                  {"er", ""},    {"ic", ""},   {"able", ""},
                                                  {"ible", ""},  {"ant", ""},  {"ement", ""},
                                                  {"ment", ""},  {"ent", ""},  {"ou", ""},
                                                  {"ism", ""},   {"ate", ""},  {"iti", ""},
                                                  {"ous", ""},   {"ive", ""},  {"ize", ""}}};
  const Rule* best = nullptr;
  for (const Rule& r : rules) {
    if (ends_with(w, r.suffix) && (best == nullptr || r.suffix.size() > best->suffix.size())) {
      best = &r;
    }
  }
  // "ion" only counts with a stem ending in s or t; it competes on length.
  bool ion = false;
  if (ends_with(w, "ion") && (best == nullptr || best->suffix.size() < 3)) {
    ion = true;
  }
  if (ion) {
    std::string stem = w.substr(0, w.size() - 3);
    if (!stem.empty() && (stem.back() == 's' || stem.back() == 't') && measure(stem) > 1) {
      w = stem;
    }
    return;
  }
  if (best != nullptr) {
    std::string stem = w.substr(0, w.size() - best->suffix.size());
    if (measure(stem) > 1) w = stem;
  }
}

void step5a(std::string& w) {
  if (!ends_with(w, "e")) return;
  std::string stem = w.substr(0, w.size() - 1);
  const int m = measure(stem);
  if (m > 1 || (m == 1 && !ends_cvc(stem))) w = stem;
}

void step5b(std::string& w) {
  if (measure(w) > 1 && ends_double_cons(w) && ends_with(w, "l")) w.pop_back();
}

}  // namespace

std::string porter_stem(const std::string& token) {
  if (token.size() <= 2) return token;
  for (char c : token) {
    if (c < 'a' || c > 'z') return token;
  }
  std::string w = token;
  step1a(w);
  step1b(w);
  step1c(w);
  step2(w);
  step3(w);
  step4(w);
  step5a(w);
  step5b(w);
  return w;
}

}  // namespace tagforge
