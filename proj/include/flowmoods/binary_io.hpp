#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace flowmoods {

// Little-endian fixed-width container primitives shared by the snapshot
// formats (see docs/formats.md). Every snapshot starts with a 8-byte magic
// and a u32 format version, and ends with the 4-byte trailer "END!".

class BinaryWriter {
public:
    explicit BinaryWriter(std::ostream& out) : out_(out) {}

    void magic(std::string_view tag);
    void u8(std::uint8_t v);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f64(double v);
    void str(std::string_view s);
    void f64s(std::span<const double> values);
    void trailer();

private:
    void raw(const void* data, std::size_t size);
    std::ostream& out_;
};

class BinaryReader {
public:
    BinaryReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

    /// Throws corrupt_file when the magic differs.
    void expect_magic(std::string_view tag);
    /// Reads the format version and throws version_mismatch unless it equals `supported`.
    std::uint32_t expect_version(std::uint32_t supported);
    std::uint8_t u8();
    std::uint32_t u32();
    std::uint64_t u64();
    double f64();
    std::string str();
    std::vector<double> f64s(std::size_t count);
    /// Element count guarded against absurd values from corrupt input.
    std::uint64_t count(std::uint64_t max_reasonable = (1ULL << 32));
    void expect_trailer();

private:
    void raw(void* data, std::size_t size);
    std::istream& in_;
    std::string source_;
};

void write_file_atomically(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace flowmoods
