#include "deblur/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "deblur/errors.hpp"
#include "deblur/pgm_io.hpp"
#include "deblur/rng.hpp"

namespace deblur {

namespace {

std::vector<int> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<int> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = int(i);
  auto rng = make_rng(seed);
  for (std::size_t i = n; i > 1; --i)
    std::swap(idx[i - 1], idx[std::size_t(rng() % i)]);
  return idx;
}

Dataset split_pairs(std::vector<Image> patches, const BlurOperator& op,
                    double train_fraction, std::uint64_t seed,
                    std::string provenance) {
  const std::size_t n = patches.size();
  std::vector<int> order = shuffled_indices(n, derive_seed(seed, 0xd5));
  std::size_t n_train = std::size_t(std::llround(train_fraction * double(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

  Dataset ds;
  ds.provenance = std::move(provenance);
  for (std::size_t pos = 0; pos < n; ++pos) {
    Image& x = patches[std::size_t(order[pos])];
    SamplePair pair{std::move(x), Image()};
    pair.y0 = op.apply(pair.x_gt);
    (pos < n_train ? ds.train : ds.test).push_back(std::move(pair));
  }
  return ds;
}

// One procedural scene: gradient background, opaque rectangles and disks for
// hard edges, and a little band-limited texture for mid frequencies.
Image synth_scene(int size, std::uint64_t seed) {
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  Image img(size, size);
  const double theta = 2.0 * M_PI * uni(rng);
  const double base = 0.25 + 0.5 * uni(rng);
  const double slope = 0.1 + 0.3 * uni(rng);
  const double ci = std::cos(theta), cj = std::sin(theta);
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j)
      img.at(i, j) = base + slope * (ci * i + cj * j) / double(size);

  const int n_rect = 2 + int(rng() % 4);
  for (int r = 0; r < n_rect; ++r) {
    const int rh = 2 + int(rng() % std::max(1, size / 3));
    const int rw = 2 + int(rng() % std::max(1, size / 3));
    const int i0 = int(rng() % std::max(1, size - rh));
    const int j0 = int(rng() % std::max(1, size - rw));
    const double level = uni(rng);
    for (int i = i0; i < i0 + rh; ++i)
      for (int j = j0; j < j0 + rw; ++j) img.at(i, j) = level;
  }

  const int n_disk = 1 + int(rng() % 3);
  for (int d = 0; d < n_disk; ++d) {
    const double radius = 2.0 + uni(rng) * size / 6.0;
    const double ic = uni(rng) * size, jc = uni(rng) * size;
    const double level = uni(rng);
    const int lo_i = std::max(0, int(ic - radius) - 1);
    const int hi_i = std::min(size - 1, int(ic + radius) + 1);
    for (int i = lo_i; i <= hi_i; ++i)
      for (int j = std::max(0, int(jc - radius) - 1);
           j <= std::min(size - 1, int(jc + radius) + 1); ++j)
        if ((i - ic) * (i - ic) + (j - jc) * (j - jc) <= radius * radius)
          img.at(i, j) = level;
  }

  for (int m = 0; m < 3; ++m) {
    const double amp = 0.02 + 0.05 * uni(rng);
    const double f1 = 1.0 + double(rng() % 6), f2 = 1.0 + double(rng() % 6);
    const double phase = 2.0 * M_PI * uni(rng);
    for (int i = 0; i < size; ++i)
      for (int j = 0; j < size; ++j)
        img.at(i, j) +=
            amp * std::cos(2.0 * M_PI * (f1 * i + f2 * j) / size + phase);
  }

  img = img.clamped(0.0, 1.0);

  // Invert half the scenes so brightness is symmetric across the corpus;
  // without this, near-black scenes are rare and the trained networks are
  // disproportionately noise-sensitive on them.
  if (uni(rng) < 0.5)
    for (int i = 0; i < size; ++i)
      for (int j = 0; j < size; ++j) img.at(i, j) = 1.0 - img.at(i, j);

  return img;
}

}  // namespace

Dataset synthesize(int count, int size, std::uint64_t seed,
                   const BlurOperator& op, double train_fraction) {
  if (count < 2) throw InvalidParameter("synthesize: count must be >= 2");
  if (size < 1) throw InvalidParameter("synthesize: size must be >= 1");
  if (op.height() != size || op.width() != size)
    throw DimensionError("synthesize: operator grid does not match size");
  if (train_fraction <= 0.0 || train_fraction >= 1.0)
    throw InvalidParameter("synthesize: train_fraction must lie in (0, 1)");

  std::vector<Image> patches;
  patches.reserve(std::size_t(count));
  for (int i = 0; i < count; ++i)
    patches.push_back(synth_scene(size, derive_seed(seed, std::uint64_t(i))));

  std::ostringstream prov;
  prov << "synth(count=" << count << ",size=" << size << ",seed=" << seed << ")";
  return split_pairs(std::move(patches), op, train_fraction, seed, prov.str());
}

Dataset ingest(const std::filesystem::path& dir, int patch_size,
               std::uint64_t seed, const BlurOperator& op,
               double train_fraction) {
  if (patch_size < 1) throw InvalidParameter("ingest: patch_size must be >= 1");
  if (op.height() != patch_size || op.width() != patch_size)
    throw DimensionError("ingest: operator grid does not match patch_size");
  if (train_fraction <= 0.0 || train_fraction >= 1.0)
    throw InvalidParameter("ingest: train_fraction must lie in (0, 1)");
  if (!std::filesystem::is_directory(dir))
    throw IoError("ingest: not a directory: " + dir.string());

  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  std::vector<Image> patches;
  for (const auto& path : files) {
    Image full;
    try {
      full = read_pnm(path);
    } catch (const IoError& err) {
      std::cerr << "ingest: skipping " << path.string() << ": " << err.what()
                << "\n";
      continue;
    }
    for (int i0 = 0; i0 + patch_size <= full.height(); i0 += patch_size)
      for (int j0 = 0; j0 + patch_size <= full.width(); j0 += patch_size) {
        Image patch(patch_size, patch_size);
        for (int i = 0; i < patch_size; ++i)
          for (int j = 0; j < patch_size; ++j)
            patch.at(i, j) = full.at(i0 + i, j0 + j);
        patches.push_back(std::move(patch));
      }
  }
  if (patches.size() < 2)
    throw IoError("ingest: " + dir.string() +
                  " yielded fewer than two usable patches");

  std::ostringstream prov;
  prov << "ingest(dir=" << dir.string() << ",patch=" << patch_size
       << ",seed=" << seed << ")";
  return split_pairs(std::move(patches), op, train_fraction, seed, prov.str());
}

void save_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.txt", std::ios::trunc);
  if (!manifest) throw IoError("save_dataset: cannot write manifest in " + dir.string());
  manifest << "provenance: " << ds.provenance << '\n';
  manifest << "train: " << ds.train.size() << '\n';
  manifest << "test: " << ds.test.size() << '\n';
  if (!manifest) throw IoError("save_dataset: manifest write failed");

  char name[32];
  for (std::size_t i = 0; i < ds.train.size(); ++i) {
    std::snprintf(name, sizeof(name), "train_%05zu.f64", i);
    write_f64(dir / name, ds.train[i].x_gt);
  }
  for (std::size_t i = 0; i < ds.test.size(); ++i) {
    std::snprintf(name, sizeof(name), "test_%05zu.f64", i);
    write_f64(dir / name, ds.test[i].x_gt);
  }
}

Dataset load_dataset(const std::filesystem::path& dir, const BlurOperator& op) {
  std::ifstream manifest(dir / "manifest.txt");
  if (!manifest)
    throw IoError("load_dataset: no manifest in " + dir.string());
  std::string line, provenance;
  std::size_t n_train = 0, n_test = 0;
  while (std::getline(manifest, line)) {
    if (line.rfind("provenance: ", 0) == 0)
      provenance = line.substr(12);
    else if (line.rfind("train: ", 0) == 0)
      n_train = std::stoull(line.substr(7));
    else if (line.rfind("test: ", 0) == 0)
      n_test = std::stoull(line.substr(6));
  }
  if (n_train == 0 && n_test == 0)
    throw IoError("load_dataset: empty or malformed manifest in " + dir.string());

  Dataset ds;
  ds.provenance = provenance;
  char name[32];
  auto load_into = [&](const char* prefix, std::size_t count,
                       std::vector<SamplePair>& out) {
    for (std::size_t i = 0; i < count; ++i) {
      std::snprintf(name, sizeof(name), "%s_%05zu.f64", prefix, i);
      Image x = read_f64(dir / name);
      if (x.height() != op.height() || x.width() != op.width())
        throw DimensionError("load_dataset: " + std::string(name) +
                             " does not match the operator grid");
      SamplePair pair{std::move(x), Image()};
      pair.y0 = op.apply(pair.x_gt);
      out.push_back(std::move(pair));
    }
  };
  load_into("train", n_train, ds.train);
  load_into("test", n_test, ds.test);
  return ds;
}

}  // namespace deblur
