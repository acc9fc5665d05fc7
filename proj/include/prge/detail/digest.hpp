#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>

#include "prge/error.hpp"

namespace prge {

// 64-bit FNV-1a. Used for cache keys and manifest content digests, not for
// anything security related.
class Digest {
public:
    Digest& update(std::string_view bytes) {
        for (unsigned char c : bytes) {
            state_ ^= c;
            state_ *= 0x100000001b3ULL;
        }
        return *this;
    }

    // Field separator so that ("ab","c") and ("a","bc") hash differently.
    Digest& field(std::string_view bytes) {
        update(bytes);
        return update(std::string_view("\x1f", 1));
    }

    std::uint64_t value() const noexcept { return state_; }

    std::string hex() const {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(state_));
        return buf;
    }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::string digest_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    Digest d;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        d.update(std::string_view(buf, static_cast<std::size_t>(in.gcount())));
    }
    return d.hex();
}

}  // namespace prge
