#include "sdm/dataset.hpp"

#include "sdm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace sdm {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_be_u32(std::istream& in, const std::string& what) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) {
        throw std::runtime_error("idx: truncated header while reading " + what);
    }
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_be_u32(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::vector<std::uint8_t> read_payload(std::istream& in, std::size_t n, const std::string& path) {
    std::vector<std::uint8_t> buf(n);
    if (n > 0 && !in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n))) {
        throw std::runtime_error("idx: payload truncated in " + path);
    }
    return buf;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

} // namespace

void Dataset::validate() const {
    if (examples.empty()) throw std::invalid_argument("dataset: empty");
    if (k < 1) throw std::invalid_argument("dataset: no labels");
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const auto& ex = examples[i];
        if (ex.x.size() != d) {
            throw std::invalid_argument("dataset: example " + std::to_string(i) +
                                        " has wrong dimension");
        }
        if (ex.y < 1 || static_cast<std::size_t>(ex.y) > k) {
            throw std::invalid_argument("dataset: example " + std::to_string(i) +
                                        " label outside 1.." + std::to_string(k));
        }
        for (std::size_t j = 0; j < ex.x.size(); ++j) {
            if (!(ex.x[j] >= 0.0 && ex.x[j] <= 1.0)) {
                throw std::invalid_argument("dataset: example " + std::to_string(i) +
                                            " leaves the unit box");
            }
        }
    }
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream fi(images_path, std::ios::binary);
    if (!fi) throw std::runtime_error("idx: cannot open " + images_path);
    if (read_be_u32(fi, "images magic") != kImagesMagic) {
        throw std::runtime_error("idx: magic mismatch in " + images_path);
    }
    const std::uint32_t count = read_be_u32(fi, "image count");
    const std::uint32_t rows = read_be_u32(fi, "rows");
    const std::uint32_t cols = read_be_u32(fi, "cols");
    const std::size_t d = static_cast<std::size_t>(rows) * cols;
    const auto pixels = read_payload(fi, static_cast<std::size_t>(count) * d, images_path);

    std::ifstream fl(labels_path, std::ios::binary);
    if (!fl) throw std::runtime_error("idx: cannot open " + labels_path);
    if (read_be_u32(fl, "labels magic") != kLabelsMagic) {
        throw std::runtime_error("idx: magic mismatch in " + labels_path);
    }
    const std::uint32_t label_count = read_be_u32(fl, "label count");
    if (label_count != count) {
        throw std::runtime_error("idx: count mismatch (" + std::to_string(count) + " images, " +
                                 std::to_string(label_count) + " labels)");
    }
    const auto labels = read_payload(fl, count, labels_path);

    Dataset ds;
    ds.d = d;
    ds.name = images_path;
    int max_label = 0;
    ds.examples.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        Tensor x({d});
        for (std::size_t j = 0; j < d; ++j) {
            x[j] = static_cast<double>(pixels[i * d + j]) / 255.0;
        }
        const int y = static_cast<int>(labels[i]) + 1;
        max_label = std::max(max_label, y);
        ds.examples.push_back({std::move(x), y});
    }
    ds.k = static_cast<std::size_t>(max_label);
    ds.validate();
    return ds;
}

void write_idx(const std::string& images_path, const std::string& labels_path,
               std::uint32_t count, std::uint32_t rows, std::uint32_t cols,
               const std::vector<std::uint8_t>& pixels,
               const std::vector<std::uint8_t>& labels) {
    if (pixels.size() != static_cast<std::size_t>(count) * rows * cols) {
        throw std::invalid_argument("write_idx: pixel payload size mismatch");
    }
    if (labels.size() != count) throw std::invalid_argument("write_idx: label count mismatch");

    std::ofstream fi(images_path, std::ios::binary | std::ios::trunc);
    if (!fi) throw std::runtime_error("write_idx: cannot open " + images_path);
    write_be_u32(fi, kImagesMagic);
    write_be_u32(fi, count);
    write_be_u32(fi, rows);
    write_be_u32(fi, cols);
    fi.write(reinterpret_cast<const char*>(pixels.data()),
             static_cast<std::streamsize>(pixels.size()));

    std::ofstream fl(labels_path, std::ios::binary | std::ios::trunc);
    if (!fl) throw std::runtime_error("write_idx: cannot open " + labels_path);
    write_be_u32(fl, kLabelsMagic);
    write_be_u32(fl, count);
    fl.write(reinterpret_cast<const char*>(labels.data()),
             static_cast<std::streamsize>(labels.size()));
    if (!fi || !fl) throw std::runtime_error("write_idx: write failed");
}

void write_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path,
               std::uint32_t rows, std::uint32_t cols) {
    if (static_cast<std::size_t>(rows) * cols != ds.d) {
        throw std::invalid_argument("write_idx: rows*cols must equal the dataset dimension");
    }
    std::vector<std::uint8_t> pixels;
    pixels.reserve(ds.size() * ds.d);
    std::vector<std::uint8_t> labels;
    labels.reserve(ds.size());
    for (const auto& ex : ds.examples) {
        for (std::size_t j = 0; j < ds.d; ++j) {
            pixels.push_back(static_cast<std::uint8_t>(std::lround(ex.x[j] * 255.0)));
        }
        labels.push_back(static_cast<std::uint8_t>(ex.y - 1));
    }
    write_idx(images_path, labels_path, static_cast<std::uint32_t>(ds.size()), rows, cols, pixels,
              labels);
}

Dataset load_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("csv: cannot open " + path);

    Dataset ds;
    ds.name = path;
    std::string line;
    std::size_t row_no = 0;
    int max_label = 0;
    while (std::getline(f, line)) {
        ++row_no;
        const std::string t = trim(line);
        if (t.empty()) continue;

        std::vector<std::string> fields;
        std::stringstream ss(t);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(trim(field));
        if (!t.empty() && t.back() == ',') fields.push_back("");

        if (fields.size() < 2) {
            throw std::runtime_error("csv row " + std::to_string(row_no) +
                                     ": expected label and at least one value");
        }
        const std::size_t d = fields.size() - 1;
        if (ds.d == 0) {
            ds.d = d;
        } else if (d != ds.d) {
            throw std::runtime_error("csv row " + std::to_string(row_no) + ": expected " +
                                     std::to_string(ds.d + 1) + " fields, got " +
                                     std::to_string(fields.size()));
        }

        const auto parse_num = [&](const std::string& s, const char* what) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(s, &used);
            } catch (const std::exception&) {
                throw std::runtime_error("csv row " + std::to_string(row_no) + ": non-numeric " +
                                         what + " '" + s + "'");
            }
            if (used != s.size()) {
                throw std::runtime_error("csv row " + std::to_string(row_no) + ": non-numeric " +
                                         what + " '" + s + "'");
            }
            return v;
        };

        const double label_val = parse_num(fields[0], "label");
        const int y = static_cast<int>(label_val);
        if (label_val != y || y < 1) {
            throw std::runtime_error("csv row " + std::to_string(row_no) +
                                     ": label must be a positive integer");
        }
        Tensor x({ds.d});
        for (std::size_t j = 0; j < ds.d; ++j) {
            const double v = parse_num(fields[j + 1], "value");
            if (!(v >= 0.0 && v <= 1.0)) {
                throw std::runtime_error("csv row " + std::to_string(row_no) + ": value " +
                                         fields[j + 1] + " outside [0,1]");
            }
            x[j] = v;
        }
        max_label = std::max(max_label, y);
        ds.examples.push_back({std::move(x), y});
    }
    if (ds.examples.empty()) throw std::runtime_error("csv: empty dataset in " + path);
    ds.k = static_cast<std::size_t>(max_label);
    ds.validate();
    return ds;
}

Dataset make_synthetic_blobs(std::size_t k, std::size_t d, std::size_t per_class, double spread,
                             std::uint64_t seed) {
    if (k < 3) throw std::invalid_argument("blobs: need at least 3 classes");
    if (d < 2) throw std::invalid_argument("blobs: need dimension >= 2");
    if (per_class < 1) throw std::invalid_argument("blobs: per_class must be >= 1");
    if (!(spread >= 0.0)) throw std::invalid_argument("blobs: spread must be >= 0");

    Rng rng(seed, /*stream=*/2);
    std::vector<std::vector<double>> centers(k, std::vector<double>(d));
    for (auto& c : centers) {
        for (auto& v : c) v = rng.uniform(0.2, 0.8);
    }

    Dataset ds;
    ds.k = k;
    ds.d = d;
    {
        std::ostringstream name;
        name << "blobs:k=" << k << ",d=" << d << ",per_class=" << per_class
             << ",spread=" << spread << ",seed=" << seed;
        ds.name = name.str();
    }
    ds.examples.reserve(k * per_class);
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t i = 0; i < per_class; ++i) {
            Tensor x({d});
            for (std::size_t j = 0; j < d; ++j) {
                double v = centers[c][j] + spread * rng.normal();
                v = v > 0.0 ? v : 0.0;
                v = v < 1.0 ? v : 1.0;
                x[j] = v;
            }
            ds.examples.push_back({std::move(x), static_cast<int>(c) + 1});
        }
    }
    ds.validate();
    return ds;
}

std::pair<Dataset, Dataset> split_per_class(const Dataset& ds, std::size_t n_train) {
    Dataset train, test;
    train.k = test.k = ds.k;
    train.d = test.d = ds.d;
    train.name = ds.name + "/train";
    test.name = ds.name + "/test";
    std::map<int, std::size_t> seen;
    for (const auto& ex : ds.examples) {
        if (seen[ex.y]++ < n_train) {
            train.examples.push_back(ex);
        } else {
            test.examples.push_back(ex);
        }
    }
    train.validate();
    test.validate();
    return {std::move(train), std::move(test)};
}

Dataset parse_dataset_spec(const std::string& spec) {
    if (spec.rfind("blobs:", 0) == 0) {
        std::map<std::string, std::string> kv;
        std::stringstream ss(spec.substr(6));
        std::string item;
        while (std::getline(ss, item, ',')) {
            const std::size_t eq = item.find('=');
            if (eq == std::string::npos) {
                throw std::invalid_argument("dataset spec: expected key=value, got '" + item + "'");
            }
            kv[trim(item.substr(0, eq))] = trim(item.substr(eq + 1));
        }
        const auto need = [&](const char* key) -> const std::string& {
            auto it = kv.find(key);
            if (it == kv.end()) {
                throw std::invalid_argument(std::string("dataset spec: missing '") + key + "'");
            }
            return it->second;
        };
        const std::size_t k = std::stoul(need("k"));
        const std::size_t d = std::stoul(need("d"));
        const std::size_t per_class = std::stoul(need("per_class"));
        const double spread = kv.count("spread") ? std::stod(kv["spread"]) : 0.05;
        const std::uint64_t seed = kv.count("seed") ? std::stoull(kv["seed"]) : 1;
        return make_synthetic_blobs(k, d, per_class, spread, seed);
    }
    if (spec.rfind("idx:", 0) == 0) {
        const std::string rest = spec.substr(4);
        const std::size_t comma = rest.find(',');
        if (comma == std::string::npos) {
            throw std::invalid_argument("dataset spec: idx needs '<images>,<labels>'");
        }
        return load_idx(trim(rest.substr(0, comma)), trim(rest.substr(comma + 1)));
    }
    if (spec.rfind("csv:", 0) == 0) return load_csv(spec.substr(4));
    if (spec.size() > 4 && spec.substr(spec.size() - 4) == ".csv") return load_csv(spec);
    throw std::invalid_argument("dataset spec: cannot interpret '" + spec +
                                "' (use blobs:, idx:, csv: or a .csv path)");
}

} // namespace sdm
