#include "ecx/catalog.hpp"

#include <algorithm>
#include <stdexcept>

namespace ecx {

Catalog::Catalog(std::vector<std::string> codes) : codes_(std::move(codes))
{
    index_.reserve(codes_.size());
    for (std::size_t i = 0; i < codes_.size(); ++i) {
        if (!index_.emplace(codes_[i], i).second) {
            throw std::invalid_argument("duplicate catalog code '" + codes_[i] + "'");
        }
    }
}

Catalog Catalog::sorted(std::vector<std::string> codes)
{
    std::sort(codes.begin(), codes.end());
    codes.erase(std::unique(codes.begin(), codes.end()), codes.end());
    return Catalog(std::move(codes));
}

std::optional<std::size_t> Catalog::find(std::string_view code) const
{
    auto it = index_.find(std::string(code));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

Catalog Catalog::subset(const std::vector<std::size_t>& ids) const
{
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (auto id : ids) out.push_back(codes_.at(id));
    return Catalog(std::move(out));
}

}  // namespace ecx
