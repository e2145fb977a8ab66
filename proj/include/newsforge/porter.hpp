#pragma once

#include <string>
#include <string_view>

namespace newsforge {

/// Porter (1980) suffix-stripping stemmer, original rule set without later
/// extensions. Input is expected lowercase; words of any length are stemmed,
/// so e.g. "does" -> "doe" and "s" -> "".
std::string porter_stem(std::string_view word);

}  // namespace newsforge
