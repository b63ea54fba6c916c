#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

#include "sparseview/geometry.hpp"

namespace sv {

/// Overlapping patches with wrap-around boundaries. Patch j starts at grid
/// offset (jx * stride_x, jy * stride_y) with j = jy * (width / stride_x) + jx.
/// Within a patch, pixels are vectorized column-major: element k = col *
/// patch_h + row.
struct PatchSpec {
    int patch_w = 8;
    int patch_h = 8;
    int stride_x = 1;
    int stride_y = 1;

    [[nodiscard]] int n() const { return patch_w * patch_h; }
    /// Throws unless patches fit the grid and strides divide its dimensions.
    void validate(const ImageGrid& grid) const;

    friend bool operator==(const PatchSpec&, const PatchSpec&) = default;
};

/// J x n, one patch (or one patch's code) per row.
using Codes = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// P_j for all j, as a precomputed gather table.
class PatchOperator {
public:
    PatchOperator(const ImageGrid& grid, const PatchSpec& spec);

    [[nodiscard]] const ImageGrid& grid() const { return grid_; }
    [[nodiscard]] const PatchSpec& spec() const { return spec_; }
    [[nodiscard]] Eigen::Index num_patches() const { return num_patches_; }
    [[nodiscard]] int patch_size() const { return spec_.n(); }

    void extract(const Eigen::VectorXd& img, Codes& out) const;
    [[nodiscard]] Codes extract(const Eigen::VectorXd& img) const;
    /// out = sum_j P_j^T (row j of patches)
    void aggregate(const Codes& patches, Eigen::VectorXd& out) const;
    [[nodiscard]] Eigen::VectorXd aggregate(const Codes& patches) const;

private:
    void check_image(const Eigen::VectorXd& img) const;
    void check_codes(const Codes& c) const;

    ImageGrid grid_;
    PatchSpec spec_;
    Eigen::Index num_patches_ = 0;
    std::vector<std::int32_t> gather_;
};

/// Psi~ = [Psi P_1; ...; Psi P_J] for a square transform Psi.
class TransformOperator {
public:
    TransformOperator(const ImageGrid& grid, const PatchSpec& spec, Eigen::MatrixXd psi);

    [[nodiscard]] const PatchOperator& patches() const { return patches_; }
    [[nodiscard]] const Eigen::MatrixXd& psi() const { return psi_; }
    [[nodiscard]] Eigen::Index num_patches() const { return patches_.num_patches(); }
    [[nodiscard]] int patch_size() const { return patches_.patch_size(); }

    /// out = Psi~ x. scratch holds the extracted patches.
    void apply(const Eigen::VectorXd& x, Codes& out, Codes& scratch) const;
    [[nodiscard]] Codes apply(const Eigen::VectorXd& x) const;
    /// out = Psi~^T c
    void adjoint(const Codes& c, Eigen::VectorXd& out, Codes& scratch) const;
    [[nodiscard]] Eigen::VectorXd adjoint(const Codes& c) const;
    /// Psi~^T Psi~ x
    [[nodiscard]] Eigen::VectorXd normal(const Eigen::VectorXd& x) const;

private:
    PatchOperator patches_;
    Eigen::MatrixXd psi_;
};

// Free-function forms.
Codes extract(const Image& img, const PatchSpec& spec);
Image aggregate(const Codes& patches, const PatchSpec& spec, const ImageGrid& grid);
Codes apply_psi_tilde(const Image& img, const Eigen::MatrixXd& psi, const PatchSpec& spec);
Image apply_psi_tilde_adjoint(const Codes& codes, const Eigen::MatrixXd& psi, const PatchSpec& spec,
                              const ImageGrid& grid);

} // namespace sv
