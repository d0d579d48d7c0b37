#include "pfge/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <sstream>

#include "pfge/error.hpp"

namespace pfge {

void Dataset::validate() const {
    if (labels.empty()) throw InvalidArgument("dataset '" + name + "' is empty");
    if (inputs.rows != labels.size()) {
        throw InvalidArgument("dataset '" + name + "': " + std::to_string(inputs.rows) + " rows but " +
                              std::to_string(labels.size()) + " labels");
    }
    for (std::size_t r = 0; r < labels.size(); ++r) {
        if (labels[r] >= classes) {
            throw InvalidArgument("dataset '" + name + "': label " + std::to_string(labels[r]) +
                                  " at row " + std::to_string(r) + " >= classes " + std::to_string(classes));
        }
    }
    for (double v : inputs.data) {
        if (!std::isfinite(v)) throw InvalidArgument("dataset '" + name + "' has a non-finite feature");
    }
}

Dataset gen_two_spirals(std::size_t n_per_class, double noise_sd, std::uint64_t seed, RngStream stream) {
    if (n_per_class < 1) throw InvalidArgument("two_spirals: n_per_class must be >= 1");
    if (noise_sd < 0.0) throw InvalidArgument("two_spirals: noise_sd must be >= 0");
    Rng rng = Rng::for_stream(seed, stream);
    Dataset ds;
    ds.name = "two_spirals";
    ds.classes = 2;
    ds.inputs = Matrix(2 * n_per_class, 2);
    ds.labels.resize(2 * n_per_class);
    // 1.75 turns, radius growing linearly with the angle.
    constexpr double turns = 1.75;
    for (std::size_t i = 0; i < n_per_class; ++i) {
        const double s = (static_cast<double>(i) + 0.5) / static_cast<double>(n_per_class);
        const double theta = 2.0 * std::numbers::pi * turns * s;
        const double r = 0.1 + 0.9 * s;
        const double x = r * std::cos(theta);
        const double y = r * std::sin(theta);
        ds.inputs(i, 0) = x;
        ds.inputs(i, 1) = y;
        ds.labels[i] = 0;
        ds.inputs(n_per_class + i, 0) = -x;
        ds.inputs(n_per_class + i, 1) = -y;
        ds.labels[n_per_class + i] = 1;
    }
    if (noise_sd > 0.0) {
        for (double& v : ds.inputs.data) v += noise_sd * rng.normal();
    }
    return ds;
}

Dataset gen_blobs(const std::vector<std::vector<double>>& centers, std::size_t n_per_class, double sd,
                  std::uint64_t seed, RngStream stream) {
    if (centers.empty()) throw InvalidArgument("blobs: need at least one center");
    if (n_per_class < 1) throw InvalidArgument("blobs: n_per_class must be >= 1");
    if (sd < 0.0) throw InvalidArgument("blobs: sd must be >= 0");
    const std::size_t dim = centers.front().size();
    if (dim == 0) throw InvalidArgument("blobs: centers must have dimension >= 1");
    for (const auto& c : centers) {
        if (c.size() != dim) throw InvalidArgument("blobs: centers have different dimensions");
    }
    Rng rng = Rng::for_stream(seed, stream);
    Dataset ds;
    ds.name = "blobs";
    ds.classes = centers.size();
    ds.inputs = Matrix(centers.size() * n_per_class, dim);
    ds.labels.resize(centers.size() * n_per_class);
    std::size_t row = 0;
    for (std::size_t k = 0; k < centers.size(); ++k) {
        for (std::size_t i = 0; i < n_per_class; ++i, ++row) {
            for (std::size_t d = 0; d < dim; ++d) {
                ds.inputs(row, d) = sd > 0.0 ? centers[k][d] + sd * rng.normal() : centers[k][d];
            }
            ds.labels[row] = k;
        }
    }
    return ds;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        // trim
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_double_cell(const std::string& cell, std::size_t row, std::size_t col) {
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (cell.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
        throw FormatError("csv row " + std::to_string(row) + ", column " + std::to_string(col) +
                          ": not a finite number: '" + cell + "'");
    }
    return v;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open csv file " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw FormatError("csv " + path.string() + ": missing header row");
    const auto header = split_csv_line(line);
    if (header.size() < 2 || header.back() != "label") {
        throw FormatError("csv " + path.string() + ": header must be f0,...,f{D-1},label");
    }
    for (std::size_t d = 0; d + 1 < header.size(); ++d) {
        if (header[d] != "f" + std::to_string(d)) {
            throw FormatError("csv " + path.string() + ": header column " + std::to_string(d) +
                              " should be f" + std::to_string(d));
        }
    }
    const std::size_t dim = header.size() - 1;

    Dataset ds;
    ds.name = path.filename().string();
    std::vector<double> values;
    std::size_t row = 1;  // data rows are numbered from 1, header is row 0
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            ++row;
            continue;
        }
        const auto cells = split_csv_line(line);
        if (cells.size() != dim + 1) {
            throw FormatError("csv row " + std::to_string(row) + ": expected " + std::to_string(dim + 1) +
                              " cells, got " + std::to_string(cells.size()));
        }
        for (std::size_t d = 0; d < dim; ++d) values.push_back(parse_double_cell(cells[d], row, d));
        long long label = -1;
        const std::string& lc = cells[dim];
        auto [ptr, ec] = std::from_chars(lc.data(), lc.data() + lc.size(), label);
        if (lc.empty() || ec != std::errc() || ptr != lc.data() + lc.size() || label < 0) {
            throw FormatError("csv row " + std::to_string(row) + ": label must be a nonnegative integer, got '" +
                              lc + "'");
        }
        ds.labels.push_back(static_cast<std::size_t>(label));
        ++row;
    }
    if (ds.labels.empty()) throw FormatError("csv " + path.string() + ": no data rows");
    ds.inputs.rows = ds.labels.size();
    ds.inputs.cols = dim;
    ds.inputs.data = std::move(values);
    ds.classes = *std::max_element(ds.labels.begin(), ds.labels.end()) + 1;
    ds.validate();
    return ds;
}

void save_csv(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write csv file " + path.string());
    for (std::size_t d = 0; d < ds.dim(); ++d) out << 'f' << d << ',';
    out << "label\n";
    out << std::setprecision(17);
    for (std::size_t r = 0; r < ds.size(); ++r) {
        for (double v : ds.inputs.row(r)) out << v << ',';
        out << ds.labels[r] << '\n';
    }
    if (!out) throw IoError("failed writing csv file " + path.string());
}

namespace {

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open idx file " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                        const std::filesystem::path& path) {
    if (bytes.size() < offset + 4) throw FormatError("idx file " + path.string() + " is truncated in its header");
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
    const auto img = read_all(images_path);
    const auto lab = read_all(labels_path);

    if (read_be32(img, 0, images_path) != 0x00000803u) {
        throw FormatError("idx images file " + images_path.string() + ": bad magic (expected 0x00000803)");
    }
    if (read_be32(lab, 0, labels_path) != 0x00000801u) {
        throw FormatError("idx labels file " + labels_path.string() + ": bad magic (expected 0x00000801)");
    }
    const std::size_t n_images = read_be32(img, 4, images_path);
    const std::size_t rows = read_be32(img, 8, images_path);
    const std::size_t cols = read_be32(img, 12, images_path);
    const std::size_t n_labels = read_be32(lab, 4, labels_path);
    const std::size_t dim = rows * cols;

    if (img.size() != 16 + n_images * dim) {
        throw FormatError("idx images file " + images_path.string() + ": expected " +
                          std::to_string(16 + n_images * dim) + " bytes, found " + std::to_string(img.size()));
    }
    if (lab.size() != 8 + n_labels) {
        throw FormatError("idx labels file " + labels_path.string() + ": expected " +
                          std::to_string(8 + n_labels) + " bytes, found " + std::to_string(lab.size()));
    }
    if (n_images != n_labels) {
        throw FormatError("idx: " + std::to_string(n_images) + " images but " + std::to_string(n_labels) +
                          " labels");
    }
    if (n_images == 0 || dim == 0) throw FormatError("idx: no images");

    Dataset ds;
    ds.name = images_path.filename().string();
    ds.inputs = Matrix(n_images, dim);
    for (std::size_t k = 0; k < n_images * dim; ++k) ds.inputs.data[k] = static_cast<double>(img[16 + k]) / 255.0;
    ds.labels.resize(n_labels);
    for (std::size_t k = 0; k < n_labels; ++k) ds.labels[k] = lab[8 + k];
    ds.classes = *std::max_element(ds.labels.begin(), ds.labels.end()) + 1;
    return ds;
}

std::int64_t iterations_per_epoch(std::size_t n, std::size_t batch_size) {
    if (batch_size == 0) throw ConfigError("batch size must be >= 1");
    return static_cast<std::int64_t>((n + batch_size - 1) / batch_size);
}

Standardizer Standardizer::fit(const Dataset& ds) {
    ds.validate();
    const std::size_t n = ds.size();
    const std::size_t dim = ds.dim();
    Standardizer s;
    s.mean.assign(dim, 0.0);
    s.scale.assign(dim, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t d = 0; d < dim; ++d) s.mean[d] += ds.inputs(r, d);
    }
    for (double& m : s.mean) m /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t d = 0; d < dim; ++d) {
            const double c = ds.inputs(r, d) - s.mean[d];
            s.scale[d] += c * c;
        }
    }
    for (double& v : s.scale) {
        v = std::sqrt(v / static_cast<double>(n));
        if (v == 0.0) v = 1.0;
    }
    return s;
}

Matrix Standardizer::apply(const Matrix& inputs) const {
    if (empty()) return inputs;
    if (inputs.cols != mean.size()) {
        throw ShapeError("standardizer fitted on " + std::to_string(mean.size()) + " features, got " +
                         std::to_string(inputs.cols));
    }
    Matrix out = inputs;
    for (std::size_t r = 0; r < out.rows; ++r) {
        auto row = out.row(r);
        for (std::size_t d = 0; d < row.size(); ++d) row[d] = (row[d] - mean[d]) / scale[d];
    }
    return out;
}

Dataset Standardizer::apply(const Dataset& ds) const {
    Dataset out = ds;
    out.inputs = apply(ds.inputs);
    return out;
}

BatchStream::BatchStream(const Dataset& ds, std::size_t batch_size, std::uint64_t seed, RngStream stream)
    : ds_(&ds), batch_size_(batch_size), rng_(Rng::for_stream(seed, stream)) {
    ds.validate();
    if (batch_size < 1 || batch_size > ds.size()) {
        throw ConfigError("batch size " + std::to_string(batch_size) + " outside [1, " +
                          std::to_string(ds.size()) + "]");
    }
    order_.resize(ds.size());
    reshuffle();
}

std::int64_t BatchStream::iterations_per_epoch() const noexcept {
    return static_cast<std::int64_t>((ds_->size() + batch_size_ - 1) / batch_size_);
}

void BatchStream::reshuffle() {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    for (std::size_t i = order_.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng_.below(i));
        std::swap(order_[i - 1], order_[j]);
    }
    cursor_ = 0;
}

Batch BatchStream::next() {
    if (cursor_ >= order_.size()) {
        reshuffle();
        ++epoch_;
    }
    const std::size_t count = std::min(batch_size_, order_.size() - cursor_);
    const std::size_t dim = ds_->dim();
    Batch b;
    b.inputs = Matrix(count, dim);
    b.labels.resize(count);
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t src = order_[cursor_ + k];
        std::copy_n(ds_->inputs.data.begin() + static_cast<std::ptrdiff_t>(src * dim), dim,
                    b.inputs.data.begin() + static_cast<std::ptrdiff_t>(k * dim));
        b.labels[k] = ds_->labels[src];
    }
    cursor_ += count;
    return b;
}

}  // namespace pfge
