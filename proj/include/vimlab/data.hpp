#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vimlab/tensor.hpp"

namespace vimlab {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
inline constexpr const char* kDataDirEnv = "VIMLAB_DATA_DIR";

struct RawImages {
  std::size_t count = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> pixels;  // count * rows * cols, row-major
  std::uint32_t crc32 = 0;           // of the whole file
};

struct RawLabels {
  std::vector<std::uint8_t> labels;
  std::uint32_t crc32 = 0;
};

enum class Split { train, test };

struct Dataset {
  Tensor images;            // n x dim, values in [0, 1]
  std::vector<int> labels;  // n entries in [0, classes)
  std::size_t classes = 10;
  Split split = Split::train;
  std::string provenance;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return images.cols(); }
  // Rows `indices` in order, same split and provenance.
  Dataset subset(std::span<const std::size_t> indices) const;
  Dataset head(std::size_t n) const;
  void validate() const;
};

RawImages load_idx_images(const std::filesystem::path& path);
RawLabels load_idx_labels(const std::filesystem::path& path, std::size_t classes = 10);
// Pixel byte / 255, flattened row-major.
Dataset normalize(const RawImages& images, const RawLabels& labels, Split split, std::string provenance = {});

struct MnistPaths {
  std::filesystem::path train_images, train_labels, test_images, test_labels;
};
// Standard file names inside `dir`, accepting both "-idx3-ubyte" and ".idx3-ubyte" spellings.
MnistPaths mnist_paths(const std::filesystem::path& dir);
// Explicit flag wins, then $VIMLAB_DATA_DIR.
std::optional<std::filesystem::path> resolve_data_dir(const std::optional<std::filesystem::path>& flag);
Dataset load_mnist(const std::filesystem::path& dir, Split split);

struct BlobSpec {
  std::size_t classes = 4;
  std::size_t per_class = 100;
  double separation = 6.0;
  std::size_t dim = 20;
  std::uint64_t seed = 1;
};

/// Gaussian classes N(mu_c, I) with mu_c = separation * e_c, so every pair of
/// means is at least `separation` apart. Values are mapped into [0, 1] by the
/// affine map (v - lo) / (hi - lo), lo/hi = extreme mean coordinate -/+ 5,
/// then clipped. Rows are interleaved by class. The map depends only on the
/// class geometry, so different seeds give compatible train/test sets.
Dataset synthetic_blobs(const BlobSpec& spec, Split split = Split::train);

}  // namespace vimlab
