#include "sparseview/patches.hpp"

#include <limits>
#include <string>

namespace sv {

void PatchSpec::validate(const ImageGrid& grid) const
{
    if (patch_w < 1 || patch_h < 1) throw ConfigError("patches: patch dimensions must be positive");
    if (stride_x < 1 || stride_y < 1) throw ConfigError("patches: strides must be positive");
    if (patch_w > grid.width || patch_h > grid.height)
        throw ConfigError("patches: patch " + std::to_string(patch_w) + "x" + std::to_string(patch_h) +
                          " does not fit a " + std::to_string(grid.width) + "x" + std::to_string(grid.height) +
                          " image");
    if (grid.width % stride_x != 0 || grid.height % stride_y != 0)
        throw ConfigError("patches: strides must divide the image dimensions");
}

PatchOperator::PatchOperator(const ImageGrid& grid, const PatchSpec& spec) : grid_(grid), spec_(spec)
{
    grid_.validate();
    spec_.validate(grid_);
    if (grid_.size() > std::numeric_limits<std::int32_t>::max())
        throw ConfigError("patches: image too large");
    const int jw = grid_.width / spec_.stride_x, jh = grid_.height / spec_.stride_y;
    num_patches_ = Eigen::Index(jw) * jh;
    const int n = spec_.n();
    gather_.resize(std::size_t(num_patches_) * std::size_t(n));
    std::size_t k = 0;
    for (int jy = 0; jy < jh; ++jy)
        for (int jx = 0; jx < jw; ++jx)
            for (int c = 0; c < spec_.patch_w; ++c)
                for (int r = 0; r < spec_.patch_h; ++r) {
                    const int x = (jx * spec_.stride_x + c) % grid_.width;
                    const int y = (jy * spec_.stride_y + r) % grid_.height;
                    gather_[k++] = y * grid_.width + x;
                }
}

void PatchOperator::check_image(const Eigen::VectorXd& img) const
{
    if (img.size() != grid_.size()) throw ConfigError("patches: image size mismatch");
}

void PatchOperator::check_codes(const Codes& c) const
{
    if (c.rows() != num_patches_ || c.cols() != spec_.n()) throw ConfigError("patches: code matrix shape mismatch");
}

void PatchOperator::extract(const Eigen::VectorXd& img, Codes& out) const
{
    check_image(img);
    out.resize(num_patches_, spec_.n());
    double* dst = out.data();
    const double* src = img.data();
    for (std::size_t k = 0; k < gather_.size(); ++k) dst[k] = src[gather_[k]];
}

Codes PatchOperator::extract(const Eigen::VectorXd& img) const
{
    Codes out;
    extract(img, out);
    return out;
}

void PatchOperator::aggregate(const Codes& patches, Eigen::VectorXd& out) const
{
    check_codes(patches);
    out.setZero(grid_.size());
    const double* src = patches.data();
    double* dst = out.data();
    for (std::size_t k = 0; k < gather_.size(); ++k) dst[gather_[k]] += src[k];
}

Eigen::VectorXd PatchOperator::aggregate(const Codes& patches) const
{
    Eigen::VectorXd out;
    aggregate(patches, out);
    return out;
}

TransformOperator::TransformOperator(const ImageGrid& grid, const PatchSpec& spec, Eigen::MatrixXd psi)
    : patches_(grid, spec), psi_(std::move(psi))
{
    if (psi_.rows() != spec.n() || psi_.cols() != spec.n())
        throw ConfigError("transform: expected a " + std::to_string(spec.n()) + "x" + std::to_string(spec.n()) +
                          " matrix for " + std::to_string(spec.patch_w) + "x" + std::to_string(spec.patch_h) +
                          " patches");
}

void TransformOperator::apply(const Eigen::VectorXd& x, Codes& out, Codes& scratch) const
{
    patches_.extract(x, scratch);
    out.resize(scratch.rows(), scratch.cols());
    out.noalias() = scratch * psi_.transpose();
}

Codes TransformOperator::apply(const Eigen::VectorXd& x) const
{
    Codes out, scratch;
    apply(x, out, scratch);
    return out;
}

void TransformOperator::adjoint(const Codes& c, Eigen::VectorXd& out, Codes& scratch) const
{
    if (c.rows() != num_patches() || c.cols() != patch_size()) throw ConfigError("transform: code shape mismatch");
    scratch.resize(c.rows(), c.cols());
    scratch.noalias() = c * psi_;
    patches_.aggregate(scratch, out);
}

Eigen::VectorXd TransformOperator::adjoint(const Codes& c) const
{
    Eigen::VectorXd out;
    Codes scratch;
    adjoint(c, out, scratch);
    return out;
}

Eigen::VectorXd TransformOperator::normal(const Eigen::VectorXd& x) const
{
    return adjoint(apply(x));
}

Codes extract(const Image& img, const PatchSpec& spec)
{
    return PatchOperator(img.grid, spec).extract(img.values);
}

Image aggregate(const Codes& patches, const PatchSpec& spec, const ImageGrid& grid)
{
    return Image(grid, PatchOperator(grid, spec).aggregate(patches));
}

Codes apply_psi_tilde(const Image& img, const Eigen::MatrixXd& psi, const PatchSpec& spec)
{
    return TransformOperator(img.grid, spec, psi).apply(img.values);
}

Image apply_psi_tilde_adjoint(const Codes& codes, const Eigen::MatrixXd& psi, const PatchSpec& spec,
                              const ImageGrid& grid)
{
    return Image(grid, TransformOperator(grid, spec, psi).adjoint(codes));
}

} // namespace sv
