#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ecx {

// Dense id <-> external code mapping. Ids are positions in `codes()`.
class Catalog {
public:
    Catalog() = default;
    // Keeps the given order; duplicates are a logic error and throw.
    explicit Catalog(std::vector<std::string> codes);

    // Sorted, de-duplicated catalog.
    static Catalog sorted(std::vector<std::string> codes);

    std::size_t size() const { return codes_.size(); }
    bool empty() const { return codes_.empty(); }
    const std::string& code(std::size_t id) const { return codes_.at(id); }
    const std::vector<std::string>& codes() const { return codes_; }
    std::optional<std::size_t> find(std::string_view code) const;

    // Sub-catalog with the listed ids, in the listed order.
    Catalog subset(const std::vector<std::size_t>& ids) const;

    bool operator==(const Catalog& other) const { return codes_ == other.codes_; }

private:
    std::vector<std::string> codes_;
    std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace ecx
