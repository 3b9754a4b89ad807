#pragma once

#include "muserag/errors.hpp"

#include <string>

namespace muserag {

struct SplitUrl {
    std::string host_port; // scheme://host[:port]
    std::string path;      // leading '/', "/" when absent
};

inline SplitUrl split_url(const std::string& url) {
    std::size_t scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("endpoint URL must include a scheme: " + url);
    }
    std::size_t path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

} // namespace muserag
