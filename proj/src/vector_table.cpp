#include "flowmoods/vector_table.hpp"

#include "flowmoods/error.hpp"

namespace flowmoods {

VectorTable::VectorTable(std::size_t dimension, std::vector<std::string> ids, std::vector<double> values)
    : dimension_(dimension), ids_(std::move(ids)), values_(std::move(values)) {
    if (values_.size() != ids_.size() * dimension_) {
        throw Error(ErrorCode::dimension_mismatch, "vector table has " + std::to_string(values_.size()) +
                                                       " values for " + std::to_string(ids_.size()) +
                                                       " ids of dimension " + std::to_string(dimension_));
    }
    index_.reserve(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        if (!index_.emplace(ids_[i], i).second) {
            throw Error(ErrorCode::duplicate_id, "duplicate vector id '" + ids_[i] + "'");
        }
    }
}

std::size_t VectorTable::find(const std::string& id) const {
    const auto it = index_.find(id);
    return it == index_.end() ? npos : it->second;
}

std::span<const double> VectorTable::vector(const std::string& id) const {
    const auto i = find(id);
    if (i == npos) throw Error(ErrorCode::not_found, "no vector for id '" + id + "'");
    return row(i);
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
    return sum;
}

}  // namespace flowmoods
