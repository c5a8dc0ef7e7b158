#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

namespace testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag)
    {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("ecx-" + tag + "-" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

    std::filesystem::path write(const std::string& name, const std::string& content) const
    {
        auto p = path_ / name;
        std::filesystem::create_directories(p.parent_path());
        std::ofstream(p, std::ios::binary) << content;
        return p;
    }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Random 0/1 matrix with every row and column nonempty.
inline Eigen::MatrixXd random_pruned_binary(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double density)
{
    std::bernoulli_distribution bit(density);
    std::uniform_int_distribution<Eigen::Index> pick_col(0, cols - 1);
    std::uniform_int_distribution<Eigen::Index> pick_row(0, rows - 1);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = bit(rng) ? 1.0 : 0.0;
    }
    for (Eigen::Index r = 0; r < rows; ++r) {
        if (m.row(r).sum() == 0) m(r, pick_col(rng)) = 1;
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
        if (m.col(c).sum() == 0) m(pick_row(rng), c) = 1;
    }
    return m;
}

}  // namespace testing
