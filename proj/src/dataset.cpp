#include "fdr/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "fdr/error.hpp"
#include "fdr/rng.hpp"

namespace fdr {

std::array<std::size_t, 4> GroupedDataset::group_counts() const {
  std::array<std::size_t, 4> counts{};
  for (std::size_t i = 0; i < size(); ++i) counts[group_of(i)]++;
  return counts;
}

void GroupedDataset::validate() const {
  require(features.rows() == labels.size() && labels.size() == attributes.size(),
          "dataset '", name, "': features/labels/attributes row counts disagree (", features.rows(),
          "/", labels.size(), "/", attributes.size(), ")");
  for (std::size_t i = 0; i < size(); ++i) {
    require(labels[i] <= 1, "dataset '", name, "': label at row ", i, " is not 0/1");
    require(attributes[i] <= 1, "dataset '", name, "': attribute at row ", i, " is not 0/1");
  }
  for (std::size_t i = 0; i < features.size(); ++i) {
    require(std::isfinite(features.data()[i]), "dataset '", name, "': non-finite feature at flat index ", i);
  }
}

void SyntheticSpec::validate() const {
  require(d_core >= 1, "synthetic spec: d_core must be >= 1");
  require(n_total >= 40, "synthetic spec: n_total must be >= 40");
  require(minority_fraction > 0.0 && minority_fraction <= 0.25,
          "synthetic spec: minority_fraction must lie in (0, 0.25]");
  require(core_separation >= 0.0, "synthetic spec: core_separation must be >= 0");
  require(spurious_correlation >= 0.0 && spurious_correlation <= 1.0,
          "synthetic spec: spurious_correlation must lie in [0, 1]");
}

namespace {

constexpr char kBinaryMagic[4] = {'F', 'D', 'R', 'F'};
constexpr std::uint32_t kBinaryVersion = 1;

std::uint8_t parse_binary_digit(std::string_view field, const char* what, std::size_t line_no) {
  if (field == "0") return 0;
  if (field == "1") return 1;
  fail("csv line ", line_no, ": ", what, " must be 0 or 1, got '", std::string(field), "'");
}

double parse_feature(std::string_view field, std::size_t line_no, std::size_t col) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    fail("csv line ", line_no, ": feature f", col, " does not parse as a decimal ('",
         std::string(field), "')");
  }
  require(std::isfinite(value), "csv line ", line_no, ": feature f", col, " is not finite");
  return value;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

GroupedDataset load_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open '", path, "' for reading");

  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "'", path, "': empty file, expected a header");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const auto header = split_fields(line);
  require(header.size() >= 2 && header[0] == "y" && header[1] == "a",
          "'", path, "': header must start with 'y,a', got '", line, "'");
  const std::size_t d = header.size() - 2;
  for (std::size_t j = 0; j < d; ++j) {
    const std::string expected = "f" + std::to_string(j);
    require(header[j + 2] == expected, "'", path, "': header column ", j + 2, " must be '",
            expected, "'");
  }

  std::vector<double> values;
  std::vector<std::uint8_t> labels, attrs;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    require(fields.size() == d + 2, "csv line ", line_no, ": expected ", d + 2, " fields, got ",
            fields.size());
    labels.push_back(parse_binary_digit(fields[0], "label y", line_no));
    attrs.push_back(parse_binary_digit(fields[1], "attribute a", line_no));
    for (std::size_t j = 0; j < d; ++j) values.push_back(parse_feature(fields[j + 2], line_no, j));
  }

  GroupedDataset ds;
  ds.name = path;
  ds.labels = std::move(labels);
  ds.attributes = std::move(attrs);
  ds.features = Matrix(ds.labels.size(), d);
  ds.features.data() = std::move(values);
  ds.validate();
  return ds;
}

template <typename T>
T read_le(const char* bytes) {
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;  // little-endian host assumed (x86/ARM); format is LE on disk
}

GroupedDataset load_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open '", path, "' for reading");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  const std::size_t header_size = 4 + 4 + 8 + 8;
  require(bytes.size() >= header_size, "'", path, "': file too short for the header (",
          bytes.size(), " bytes)");
  require(std::memcmp(bytes.data(), kBinaryMagic, 4) == 0, "'", path,
          "': bad magic, expected FDRF");
  const auto version = read_le<std::uint32_t>(bytes.data() + 4);
  require(version == kBinaryVersion, "'", path, "': unsupported version ", version);
  const auto n = static_cast<std::size_t>(read_le<std::uint64_t>(bytes.data() + 8));
  const auto d = static_cast<std::size_t>(read_le<std::uint64_t>(bytes.data() + 16));

  const std::size_t feature_bytes = n * d * sizeof(float);
  const std::size_t expected = header_size + feature_bytes + 2 * n;
  if (bytes.size() < expected) {
    const std::size_t available = bytes.size() - header_size;
    const std::size_t complete_rows = d == 0 ? 0 : available / (d * sizeof(float));
    fail("'", path, "': truncated, declared n=", n, " rows but only ",
         std::min(complete_rows, n), " complete feature rows are present (", bytes.size(), " of ",
         expected, " bytes)");
  }
  require(bytes.size() == expected, "'", path, "': trailing bytes, expected ", expected, " got ",
          bytes.size());

  GroupedDataset ds;
  ds.name = path;
  ds.features = Matrix(n, d);
  const char* p = bytes.data() + header_size;
  for (std::size_t i = 0; i < n * d; ++i) {
    const float v = read_le<float>(p + i * sizeof(float));
    require(std::isfinite(v), "'", path, "': non-finite feature at row ", i / std::max<std::size_t>(d, 1));
    ds.features.data()[i] = static_cast<double>(v);
  }
  p += feature_bytes;
  ds.labels.resize(n);
  ds.attributes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = static_cast<std::uint8_t>(p[i]);
    require(y <= 1, "'", path, "': label at row ", i, " is not 0/1");
    ds.labels[i] = y;
  }
  p += n;
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = static_cast<std::uint8_t>(p[i]);
    require(a <= 1, "'", path, "': attribute at row ", i, " is not 0/1");
    ds.attributes[i] = a;
  }
  return ds;
}

void save_csv(const GroupedDataset& ds, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "cannot open '", path, "' for writing");
  out << "y,a";
  for (std::size_t j = 0; j < ds.dim(); ++j) out << ",f" << j;
  out << "\n";
  char buf[64];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << int(ds.labels[i]) << ',' << int(ds.attributes[i]);
    for (std::size_t j = 0; j < ds.dim(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", ds.features(i, j));
      out << ',' << buf;
    }
    out << "\n";
  }
  require(out.good(), "write to '", path, "' failed");
}

void save_binary(const GroupedDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot open '", path, "' for writing");
  out.write(kBinaryMagic, 4);
  const std::uint32_t version = kBinaryVersion;
  const std::uint64_t n = ds.size();
  const std::uint64_t d = ds.dim();
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&n), 8);
  out.write(reinterpret_cast<const char*>(&d), 8);
  for (double v : ds.features.data()) {
    const float f = static_cast<float>(v);
    out.write(reinterpret_cast<const char*>(&f), sizeof(float));
  }
  out.write(reinterpret_cast<const char*>(ds.labels.data()),
            static_cast<std::streamsize>(ds.labels.size()));
  out.write(reinterpret_cast<const char*>(ds.attributes.data()),
            static_cast<std::streamsize>(ds.attributes.size()));
  require(out.good(), "write to '", path, "' failed");
}

}  // namespace

GroupedDataset load_dataset(const std::string& path, FileFormat format) {
  return format == FileFormat::Csv ? load_csv(path) : load_binary(path);
}

void save_dataset(const GroupedDataset& ds, const std::string& path, FileFormat format) {
  if (format == FileFormat::Csv) {
    save_csv(ds, path);
  } else {
    save_binary(ds, path);
  }
}

GroupedDataset subset_rows(const GroupedDataset& ds, const std::vector<std::size_t>& indices,
                           std::string name) {
  GroupedDataset out;
  out.name = std::move(name);
  out.features = Matrix(indices.size(), ds.dim());
  out.labels.reserve(indices.size());
  out.attributes.reserve(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const std::size_t i = indices[k];
    std::copy_n(ds.features.row(i), ds.dim(), out.features.row(k));
    out.labels.push_back(ds.labels[i]);
    out.attributes.push_back(ds.attributes[i]);
  }
  return out;
}

GroupedDataset concat_rows(const GroupedDataset& a, const GroupedDataset& b, std::string name) {
  require(a.dim() == b.dim(), "concat: dimension mismatch (", a.dim(), " vs ", b.dim(), ")");
  GroupedDataset out;
  out.name = std::move(name);
  out.features = Matrix(a.size() + b.size(), a.dim());
  std::copy(a.features.data().begin(), a.features.data().end(), out.features.data().begin());
  std::copy(b.features.data().begin(), b.features.data().end(),
            out.features.data().begin() + static_cast<std::ptrdiff_t>(a.features.size()));
  out.labels = a.labels;
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  out.attributes = a.attributes;
  out.attributes.insert(out.attributes.end(), b.attributes.begin(), b.attributes.end());
  return out;
}

std::array<GroupedDataset, 3> split_dataset(const GroupedDataset& ds, SplitFractions fractions,
                                            std::uint64_t seed, bool stratified) {
  for (double f : {fractions.train, fractions.val, fractions.test}) {
    require(f > 0.0 && f < 1.0, "split: each fraction must lie in (0, 1)");
  }
  require(std::abs(fractions.train + fractions.val + fractions.test - 1.0) < 1e-9,
          "split: fractions must sum to 1");

  // Pools to split independently: each group when stratified, else all rows.
  std::vector<std::vector<std::size_t>> pools;
  if (stratified) {
    pools.resize(4);
    for (std::size_t i = 0; i < ds.size(); ++i) pools[ds.group_of(i)].push_back(i);
    for (int g = 0; g < 4; ++g) {
      require(pools[g].size() >= 3, "split: stratified mode needs >= 3 rows per group, group (y=",
              g / 2, ",a=", g % 2, ") has ", pools[g].size());
    }
  } else {
    pools.emplace_back(ds.size());
    std::iota(pools[0].begin(), pools[0].end(), 0);
  }

  Rng rng(seed);
  std::array<std::vector<std::size_t>, 3> parts;
  for (auto& pool : pools) {
    rng.shuffle(pool);
    const std::size_t k = pool.size();
    std::size_t n_val = static_cast<std::size_t>(std::floor(fractions.val * static_cast<double>(k)));
    std::size_t n_test = static_cast<std::size_t>(std::floor(fractions.test * static_cast<double>(k)));
    const std::size_t n_train = k - n_val - n_test;  // floor remainder goes to train
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n_train; ++i) parts[0].push_back(pool[pos++]);
    for (std::size_t i = 0; i < n_val; ++i) parts[1].push_back(pool[pos++]);
    for (std::size_t i = 0; i < n_test; ++i) parts[2].push_back(pool[pos++]);
  }

  const char* names[3] = {"train", "val", "test"};
  for (int s = 0; s < 3; ++s) {
    require(!parts[s].empty(), "split: the '", names[s],
            "' split is empty under floor rounding; use larger fractions or more data");
    std::sort(parts[s].begin(), parts[s].end());
  }
  return {subset_rows(ds, parts[0], ds.name + "/train"), subset_rows(ds, parts[1], ds.name + "/val"),
          subset_rows(ds, parts[2], ds.name + "/test")};
}

GroupedDataset balanced_subsample(const GroupedDataset& train, const GroupedDataset& val,
                                  std::optional<std::size_t> per_group, std::uint64_t seed) {
  const GroupedDataset pool = concat_rows(train, val, "balanced");
  std::array<std::vector<std::size_t>, 4> by_group;
  for (std::size_t i = 0; i < pool.size(); ++i) by_group[pool.group_of(i)].push_back(i);

  std::size_t min_count = pool.size();
  for (int g = 0; g < 4; ++g) {
    require(!by_group[g].empty(), "balanced_subsample: group (y=", g / 2, ",a=", g % 2,
            ") is empty in the pooled data");
    min_count = std::min(min_count, by_group[g].size());
  }
  const std::size_t k = per_group.value_or(min_count);
  require(k > 0, "balanced_subsample: per_group must be positive");
  require(k <= min_count, "balanced_subsample: per_group=", k, " exceeds the minimum group size ",
          min_count);

  Rng rng(seed);
  std::vector<std::size_t> chosen;
  chosen.reserve(4 * k);
  for (int g = 0; g < 4; ++g) {
    rng.shuffle(by_group[g]);
    chosen.insert(chosen.end(), by_group[g].begin(), by_group[g].begin() + static_cast<std::ptrdiff_t>(k));
  }
  return subset_rows(pool, chosen, "balanced");
}

std::array<double, 4> group_weights(const GroupedDataset& ds) {
  const auto counts = ds.group_counts();
  const double n = static_cast<double>(ds.size());
  std::array<double, 4> weights{};
  for (int g = 0; g < 4; ++g) {
    require(counts[g] > 0, "group_weights: group (y=", g / 2, ",a=", g % 2, ") is empty");
    weights[g] = (n / 4.0) / static_cast<double>(counts[g]);
  }
  return weights;
}

std::array<double, 4> class_weights(const GroupedDataset& ds) {
  const auto counts = ds.group_counts();
  const double n = static_cast<double>(ds.size());
  std::array<double, 4> weights{};
  for (int y = 0; y < 2; ++y) {
    const std::size_t count = counts[2 * y] + counts[2 * y + 1];
    require(count > 0, "class_weights: class y=", y, " is empty");
    weights[2 * y] = weights[2 * y + 1] = (n / 2.0) / static_cast<double>(count);
  }
  return weights;
}

SyntheticSpec parse_spec_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open spec file '", path, "'");
  SyntheticSpec spec;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const std::size_t eq = line.find('=');
    require(eq != std::string::npos, "spec file '", path, "' line ", line_no,
            ": expected key = value");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    require(!value.empty(), "spec file '", path, "' line ", line_no, ": empty value");
    try {
      if (key == "n_total") {
        spec.n_total = std::stoull(value);
      } else if (key == "d_core") {
        spec.d_core = std::stoull(value);
      } else if (key == "d_spurious") {
        spec.d_spurious = std::stoull(value);
      } else if (key == "d_noise") {
        spec.d_noise = std::stoull(value);
      } else if (key == "minority_fraction") {
        spec.minority_fraction = std::stod(value);
      } else if (key == "core_separation") {
        spec.core_separation = std::stod(value);
      } else if (key == "spurious_correlation") {
        spec.spurious_correlation = std::stod(value);
      } else if (key == "seed") {
        spec.seed = std::stoull(value);
      } else {
        fail("spec file '", path, "' line ", line_no, ": unknown key '", key, "'");
      }
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      fail("spec file '", path, "' line ", line_no, ": cannot parse value '", value, "'");
    }
  }
  return spec;
}

GroupedDataset gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n_total;

  // Group shares: the minority (y=1, a=1) cell takes minority_fraction, the
  // remaining mass splits over the other cells in the proportions of the
  // reference face-attribute composition (44/41/14 at 1% minority). Counts
  // are allocated by largest remainder, then every cell is topped up to at
  // least one row from the largest cell.
  const double mf = spec.minority_fraction;
  const double rest = (1.0 - mf) / 0.99;
  const std::array<double, 4> shares = {0.44 * rest, 0.41 * rest, 0.14 * rest, mf};
  std::array<std::size_t, 4> counts{};
  std::array<double, 4> remainders{};
  std::size_t assigned = 0;
  for (int g = 0; g < 4; ++g) {
    const double exact = shares[g] * static_cast<double>(n);
    counts[g] = static_cast<std::size_t>(std::floor(exact));
    remainders[g] = exact - std::floor(exact);
    assigned += counts[g];
  }
  while (assigned < n) {
    int best = 0;
    for (int g = 1; g < 4; ++g) {
      if (remainders[g] > remainders[best]) best = g;
    }
    counts[best]++;
    remainders[best] = -1.0;
    ++assigned;
  }
  for (int g = 0; g < 4; ++g) {
    if (counts[g] == 0) {
      int largest = 0;
      for (int h = 1; h < 4; ++h) {
        if (counts[h] > counts[largest]) largest = h;
      }
      counts[largest]--;
      counts[g]++;
    }
  }

  const std::size_t d = spec.dim();
  GroupedDataset ds;
  ds.name = "synthetic";
  ds.features = Matrix(n, d);
  ds.labels.resize(n);
  ds.attributes.resize(n);

  Rng rng(spec.seed);
  std::size_t row = 0;
  for (int g = 0; g < 4; ++g) {
    const auto key = GroupKey::from_index(g);
    for (std::size_t i = 0; i < counts[g]; ++i, ++row) {
      ds.labels[row] = key.y;
      ds.attributes[row] = key.a;
      double* f = ds.features.row(row);
      const double core_mean = (key.y == 1 ? 0.5 : -0.5) * spec.core_separation;
      for (std::size_t j = 0; j < spec.d_core; ++j) f[j] = core_mean + rng.normal();
      const bool aligned = rng.uniform() < spec.spurious_correlation;
      const std::uint8_t apparent = aligned ? key.a : static_cast<std::uint8_t>(1 - key.a);
      const double spur_mean = (apparent == 1 ? 0.5 : -0.5) * kSpuriousSeparation;
      for (std::size_t j = 0; j < spec.d_spurious; ++j) {
        f[spec.d_core + j] = spur_mean + rng.normal();
      }
      for (std::size_t j = 0; j < spec.d_noise; ++j) {
        f[spec.d_core + spec.d_spurious + j] = rng.normal();
      }
    }
  }

  // Deterministic row shuffle so group blocks are interleaved.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  return subset_rows(ds, order, "synthetic");
}

}  // namespace fdr
