#include "vocalnote/fsutil.h"

#include "vocalnote/error.h"

#include <fmt/format.h>
#include <openssl/evp.h>

#include <array>
#include <atomic>
#include <fstream>
#include <sstream>
#include <system_error>
#include <unistd.h>

namespace vocalnote {

std::string read_file(const fs::path& path) {
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) {
        throw Error(ErrorKind::MissingInput, fmt::format("cannot read '{}': no such file", path.string()));
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::Io, fmt::format("cannot open '{}'", path.string()));
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const fs::path& path, std::string_view content) {
    static std::atomic<unsigned> counter{0};
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    const auto tmp = fs::path(path.string() + fmt::format(".tmp.{}.{}", ::getpid(), counter++));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::Io, fmt::format("cannot write '{}'", tmp.string()));
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw Error(ErrorKind::Io, fmt::format("short write to '{}'", tmp.string()));
    }
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error(ErrorKind::Io, fmt::format("cannot rename into '{}'", path.string()));
    }
}

std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorKind::Io, "SHA-256 failed");
    }
    std::string hex;
    hex.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

std::string sha256_file(const fs::path& path) {
    return sha256_hex(read_file(path));
}

std::uint32_t derive_seed(std::uint64_t seed, std::string_view key) {
    const auto hex = sha256_hex(fmt::format("{}:{}", seed, key));
    return static_cast<std::uint32_t>(std::stoul(hex.substr(0, 8), nullptr, 16) & 0x7FFFFFFFu);
}

} // namespace vocalnote
