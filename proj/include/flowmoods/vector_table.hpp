#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace flowmoods {

// Row-major table of equally sized real vectors keyed by string id.
class VectorTable {
public:
    VectorTable() = default;
    /// Throws dimension_mismatch if values.size() != ids.size() * dimension,
    /// duplicate_id on repeated ids.
    VectorTable(std::size_t dimension, std::vector<std::string> ids, std::vector<double> values);

    std::size_t dimension() const noexcept { return dimension_; }
    std::size_t size() const noexcept { return ids_.size(); }
    bool empty() const noexcept { return ids_.empty(); }

    const std::vector<std::string>& ids() const noexcept { return ids_; }
    std::span<const double> values() const noexcept { return values_; }
    std::span<const double> row(std::size_t i) const noexcept {
        return {values_.data() + i * dimension_, dimension_};
    }
    const std::string& id(std::size_t i) const noexcept { return ids_[i]; }

    /// Row index, or npos when the id is absent.
    std::size_t find(const std::string& id) const;
    bool contains(const std::string& id) const { return find(id) != npos; }
    /// Throws not_found for absent ids.
    std::span<const double> vector(const std::string& id) const;

    bool operator==(const VectorTable& other) const {
        return dimension_ == other.dimension_ && ids_ == other.ids_ && values_ == other.values_;
    }

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

private:
    std::size_t dimension_ = 0;
    std::vector<std::string> ids_;
    std::vector<double> values_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Plain sequential inner product. Every similarity in the project goes
/// through this function so exact and approximate search agree bit for bit.
double dot(std::span<const double> a, std::span<const double> b) noexcept;

}  // namespace flowmoods
