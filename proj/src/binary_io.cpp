#include "flowmoods/binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "flowmoods/error.hpp"

static_assert(std::endian::native == std::endian::little, "snapshot IO assumes a little-endian host");

namespace flowmoods {

namespace {
constexpr std::string_view kTrailer = "END!";
constexpr std::size_t kMagicSize = 8;
}  // namespace

void BinaryWriter::raw(const void* data, std::size_t size) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
}

void BinaryWriter::magic(std::string_view tag) {
    char buf[kMagicSize] = {};
    std::memcpy(buf, tag.data(), std::min(tag.size(), kMagicSize));
    raw(buf, kMagicSize);
}

void BinaryWriter::u8(std::uint8_t v) { raw(&v, sizeof v); }
void BinaryWriter::u32(std::uint32_t v) { raw(&v, sizeof v); }
void BinaryWriter::u64(std::uint64_t v) { raw(&v, sizeof v); }
void BinaryWriter::f64(double v) { raw(&v, sizeof v); }

void BinaryWriter::str(std::string_view s) {
    u64(s.size());
    raw(s.data(), s.size());
}

void BinaryWriter::f64s(std::span<const double> values) {
    raw(values.data(), values.size_bytes());
}

void BinaryWriter::trailer() { raw(kTrailer.data(), kTrailer.size()); }

void BinaryReader::raw(void* data, std::size_t size) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
    if (static_cast<std::size_t>(in_.gcount()) != size) {
        throw Error(ErrorCode::corrupt_file, source_ + ": unexpected end of file (truncated snapshot)");
    }
}

void BinaryReader::expect_magic(std::string_view tag) {
    char buf[kMagicSize] = {};
    raw(buf, kMagicSize);
    char want[kMagicSize] = {};
    std::memcpy(want, tag.data(), std::min(tag.size(), kMagicSize));
    if (std::memcmp(buf, want, kMagicSize) != 0) {
        throw Error(ErrorCode::corrupt_file, source_ + ": not a " + std::string(tag) + " snapshot");
    }
}

std::uint32_t BinaryReader::expect_version(std::uint32_t supported) {
    const std::uint32_t found = u32();
    if (found != supported) {
        throw Error(ErrorCode::version_mismatch, source_ + ": snapshot version " + std::to_string(found) +
                                                     " is not supported (supported version " +
                                                     std::to_string(supported) + ")");
    }
    return found;
}

std::uint8_t BinaryReader::u8() {
    std::uint8_t v;
    raw(&v, sizeof v);
    return v;
}

std::uint32_t BinaryReader::u32() {
    std::uint32_t v;
    raw(&v, sizeof v);
    return v;
}

std::uint64_t BinaryReader::u64() {
    std::uint64_t v;
    raw(&v, sizeof v);
    return v;
}

double BinaryReader::f64() {
    double v;
    raw(&v, sizeof v);
    return v;
}

std::string BinaryReader::str() {
    const auto size = count(1ULL << 24);
    std::string s(size, '\0');
    raw(s.data(), size);
    return s;
}

std::vector<double> BinaryReader::f64s(std::size_t n) {
    // Reject counts the stream cannot satisfy before allocating for them.
    const auto here = in_.tellg();
    if (here != std::istream::pos_type(-1)) {
        in_.seekg(0, std::ios::end);
        const auto end = in_.tellg();
        in_.seekg(here);
        if (static_cast<std::uint64_t>(end - here) / sizeof(double) < n) {
            throw Error(ErrorCode::corrupt_file, source_ + ": unexpected end of file (truncated snapshot)");
        }
    }
    std::vector<double> values(n);
    raw(values.data(), n * sizeof(double));
    return values;
}

std::uint64_t BinaryReader::count(std::uint64_t max_reasonable) {
    const auto n = u64();
    if (n > max_reasonable) {
        throw Error(ErrorCode::corrupt_file, source_ + ": implausible element count " + std::to_string(n));
    }
    return n;
}

void BinaryReader::expect_trailer() {
    char buf[4];
    raw(buf, sizeof buf);
    if (std::string_view(buf, 4) != kTrailer) {
        throw Error(ErrorCode::corrupt_file, source_ + ": missing end-of-snapshot trailer");
    }
}

void write_file_atomically(const std::filesystem::path& path, std::string_view contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::io_error, "cannot open " + tmp.string() + " for writing");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw Error(ErrorCode::io_error, "write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string() + ": file missing or unreadable");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace flowmoods
