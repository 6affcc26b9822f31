#pragma once

#include <string>
#include <string_view>

namespace quantkit {

inline std::string to_upper(std::string_view s) {
    std::string out(s);
    for (auto& ch : out)
        if (ch >= 'a' && ch <= 'z') ch = static_cast<char>(ch - 'a' + 'A');
    return out;
}

} // namespace quantkit
