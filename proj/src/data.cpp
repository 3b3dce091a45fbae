#include "vimlab/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>

#include "vimlab/errors.hpp"

namespace vimlab {

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

std::uint32_t crc_of(const std::vector<std::uint8_t>& bytes) {
  return static_cast<std::uint32_t>(::crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset, const std::string& file) {
  if (bytes.size() < offset + 4) throw FormatError(file + ": header truncated", bytes.size());
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

std::string hex32(std::uint32_t v) {
  std::ostringstream os;
  os << "0x" << std::hex;
  os.width(8);
  os.fill('0');
  os << v;
  return os.str();
}

}  // namespace

RawImages load_idx_images(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  const std::string file = path.string();
  const std::uint32_t magic = read_be32(bytes, 0, file);
  if (magic != kIdxImageMagic) {
    throw FormatError(file + ": bad image magic " + hex32(magic) + ", expected " + hex32(kIdxImageMagic), 0);
  }
  RawImages out;
  out.count = read_be32(bytes, 4, file);
  out.rows = read_be32(bytes, 8, file);
  out.cols = read_be32(bytes, 12, file);
  const std::size_t expected = 16 + out.count * out.rows * out.cols;
  if (bytes.size() < expected) {
    throw FormatError(file + ": truncated image data, expected " + std::to_string(expected) + " bytes", bytes.size());
  }
  out.pixels.assign(bytes.begin() + 16, bytes.begin() + static_cast<std::ptrdiff_t>(expected));
  out.crc32 = crc_of(bytes);
  return out;
}

RawLabels load_idx_labels(const std::filesystem::path& path, std::size_t classes) {
  const auto bytes = read_file(path);
  const std::string file = path.string();
  const std::uint32_t magic = read_be32(bytes, 0, file);
  if (magic != kIdxLabelMagic) {
    throw FormatError(file + ": bad label magic " + hex32(magic) + ", expected " + hex32(kIdxLabelMagic), 0);
  }
  const std::size_t n = read_be32(bytes, 4, file);
  if (bytes.size() < 8 + n) {
    throw FormatError(file + ": truncated label data, expected " + std::to_string(8 + n) + " bytes", bytes.size());
  }
  RawLabels out;
  out.labels.assign(bytes.begin() + 8, bytes.begin() + static_cast<std::ptrdiff_t>(8 + n));
  for (std::size_t i = 0; i < n; ++i) {
    if (out.labels[i] >= classes) {
      throw FormatError(file + ": label " + std::to_string(out.labels[i]) + " out of range", 8 + i);
    }
  }
  out.crc32 = crc_of(bytes);
  return out;
}

Dataset normalize(const RawImages& images, const RawLabels& labels, Split split, std::string provenance) {
  if (images.count != labels.labels.size()) {
    throw DataError("image count " + std::to_string(images.count) + " differs from label count " +
                    std::to_string(labels.labels.size()));
  }
  const std::size_t dim = images.rows * images.cols;
  Dataset out;
  out.images = Tensor({images.count, dim});
  auto dst = out.images.data();
  for (std::size_t i = 0; i < images.pixels.size(); ++i) dst[i] = images.pixels[i] / 255.0;
  out.labels.assign(labels.labels.begin(), labels.labels.end());
  out.split = split;
  out.provenance = std::move(provenance);
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  const std::size_t d = dim();
  Dataset out;
  out.images = Tensor({indices.size(), d});
  auto dst = out.images.data();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= size()) throw IndexError("dataset subset index out of range");
    auto src = images.row(indices[i]);
    std::ranges::copy(src, dst.begin() + static_cast<std::ptrdiff_t>(i * d));
    out.labels.push_back(labels[indices[i]]);
  }
  out.classes = classes;
  out.split = split;
  out.provenance = provenance;
  return out;
}

Dataset Dataset::head(std::size_t n) const {
  std::vector<std::size_t> idx(std::min(n, size()));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Dataset out = subset(idx);
  if (n < size()) out.provenance += " [first " + std::to_string(n) + "]";
  return out;
}

void Dataset::validate() const {
  if (images.rows() != labels.size()) throw DataError("dataset rows and labels differ in count");
  for (double v : images.data()) {
    if (!(v >= 0.0 && v <= 1.0)) throw DataError("dataset value outside [0, 1]");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) throw DataError("dataset label out of range");
  }
}

MnistPaths mnist_paths(const std::filesystem::path& dir) {
  auto pick = [&](const std::string& stem, const std::string& kind) {
    for (const char* sep : {"-", "."}) {
      auto p = dir / (stem + sep + kind);
      if (std::filesystem::exists(p)) return p;
    }
    return dir / (stem + "-" + kind);
  };
  return {pick("train-images", "idx3-ubyte"), pick("train-labels", "idx1-ubyte"), pick("t10k-images", "idx3-ubyte"),
          pick("t10k-labels", "idx1-ubyte")};
}

std::optional<std::filesystem::path> resolve_data_dir(const std::optional<std::filesystem::path>& flag) {
  if (flag && !flag->empty()) return flag;
  if (const char* env = std::getenv(kDataDirEnv); env && *env) return std::filesystem::path(env);
  return std::nullopt;
}

Dataset load_mnist(const std::filesystem::path& dir, Split split) {
  const auto paths = mnist_paths(dir);
  const auto& img_path = split == Split::train ? paths.train_images : paths.test_images;
  const auto& lbl_path = split == Split::train ? paths.train_labels : paths.test_labels;
  RawImages images = load_idx_images(img_path);
  RawLabels labels = load_idx_labels(lbl_path);
  std::ostringstream prov;
  prov << img_path.filename().string() << " crc32=" << hex32(images.crc32) << ", " << lbl_path.filename().string()
       << " crc32=" << hex32(labels.crc32);
  return normalize(images, labels, split, prov.str());
}

Dataset synthetic_blobs(const BlobSpec& spec, Split split) {
  if (spec.classes < 2) throw ContractError("synthetic_blobs: need at least two classes");
  if (spec.dim < spec.classes) throw ContractError("synthetic_blobs: dim must be >= classes");
  if (spec.per_class == 0) throw ContractError("synthetic_blobs: per_class must be positive");
  if (!(spec.separation >= 0.0)) throw ContractError("synthetic_blobs: separation must be >= 0");

  const double lo = -5.0;
  const double hi = spec.separation + 5.0;
  const double span = hi - lo;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  const std::size_t n = spec.classes * spec.per_class;
  Dataset out;
  out.images = Tensor({n, spec.dim});
  out.classes = spec.classes;
  out.split = split;
  auto dst = out.images.data();
  for (std::size_t i = 0; i < spec.per_class; ++i) {
    for (std::size_t c = 0; c < spec.classes; ++c) {
      const std::size_t r = i * spec.classes + c;
      for (std::size_t d = 0; d < spec.dim; ++d) {
        const double mean = d == c ? spec.separation : 0.0;
        dst[r * spec.dim + d] = std::clamp((mean + noise(rng) - lo) / span, 0.0, 1.0);
      }
      out.labels.push_back(static_cast<int>(c));
    }
  }
  std::ostringstream prov;
  prov << "synthetic_blobs(classes=" << spec.classes << ", per_class=" << spec.per_class
       << ", separation=" << spec.separation << ", dim=" << spec.dim << ", seed=" << spec.seed
       << ", map=(v-" << lo << ")/" << span << " clipped to [0,1])";
  out.provenance = prov.str();
  return out;
}

}  // namespace vimlab
