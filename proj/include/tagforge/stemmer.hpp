#pragma once

#include <string>

namespace tagforge {

// Classic Porter suffix-stripping stemmer (the original 1980 rule set, no
// later extensions). Input must already be lowercase; tokens containing
// anything outside [a-z], and tokens of length <= 2, are returned unchanged.
std::string porter_stem(const std::string& token);

}  // namespace tagforge
