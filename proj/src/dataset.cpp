#include "dpcn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>

namespace fs = std::filesystem;

namespace dpcn {

void PreprocessConfig::validate() const {
    if (target_side <= 0 || target_side % 4 != 0)
        throw DpcnError("target_side must be a positive multiple of 4");
    if (!(crop_threshold > 0.0 && crop_threshold < 1.0))
        throw DpcnError("crop_threshold must lie in (0,1)");
    if (augment_cap < 1.0) throw DpcnError("augment_cap must be >= 1");
}

Scenario parse_scenario(const std::string& name) {
    if (name == "sc1") return Scenario::SC1;
    if (name == "sc2") return Scenario::SC2;
    if (name == "sc3") return Scenario::SC3;
    throw DpcnError("unknown scenario '" + name + "' (expected sc1|sc2|sc3)");
}

std::string scenario_name(Scenario s) {
    switch (s) {
        case Scenario::SC1: return "sc1";
        case Scenario::SC2: return "sc2";
        default: return "sc3";
    }
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

} // namespace

LabeledImageSet load_dataset(const std::string& root_path, int num_classes) {
    if (num_classes < 2) throw DpcnError("load_dataset: need at least 2 classes");
    const fs::path root(root_path);
    const fs::path csv = root / "labels.csv";
    std::ifstream in(csv);
    if (!in) throw DpcnError("cannot open '" + csv.string() + "'");

    std::string line;
    if (!std::getline(in, line)) throw DpcnError("no samples in '" + csv.string() + "'");
    if (trim(line) != "filename,grade")
        throw DpcnError("'" + csv.string() + "': expected header 'filename,grade'");

    std::vector<std::pair<std::string, int>> rows;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.empty()) continue;
        const std::size_t comma = t.find(',');
        if (comma == std::string::npos)
            throw DpcnError("'" + csv.string() + "': malformed row '" + t + "'");
        const std::string name = trim(t.substr(0, comma));
        const std::string grade_str = trim(t.substr(comma + 1));
        int grade = 0;
        try {
            std::size_t pos = 0;
            grade = std::stoi(grade_str, &pos);
            if (pos != grade_str.size()) throw std::invalid_argument(grade_str);
        } catch (const std::exception&) {
            throw DpcnError("'" + csv.string() + "': bad grade '" + grade_str + "'");
        }
        if (grade < 0 || grade >= num_classes)
            throw DpcnError("grade " + std::to_string(grade) + " for '" + name +
                            "' out of range for " + std::to_string(num_classes) + " classes");
        rows.emplace_back(name, grade);
    }
    if (rows.empty()) throw DpcnError("no samples in '" + csv.string() + "'");
    std::sort(rows.begin(), rows.end());

    LabeledImageSet set;
    set.num_classes = num_classes;
    set.items.reserve(rows.size());
    for (const auto& [name, grade] : rows) {
        const fs::path img_path = root / "images" / name;
        if (!fs::exists(img_path))
            throw DpcnError("missing image file '" + img_path.string() + "'");
        LabeledImage img;
        img.pixels = read_pnm(img_path.string());
        img.grade = grade;
        img.id = name;
        set.items.push_back(std::move(img));
    }
    return set;
}

void save_dataset(const std::string& root_path, const LabeledImageSet& set) {
    const fs::path root(root_path);
    fs::create_directories(root / "images");
    std::ofstream csv(root / "labels.csv", std::ios::binary);
    if (!csv) throw DpcnError("cannot write '" + (root / "labels.csv").string() + "'");
    csv << "filename,grade\n";
    for (const auto& item : set.items) {
        std::string name = item.id;
        const bool has_ext = name.size() > 4 &&
            (name.compare(name.size() - 4, 4, ".pgm") == 0 ||
             name.compare(name.size() - 4, 4, ".ppm") == 0);
        if (!has_ext) name += (item.pixels.c == 3 ? ".ppm" : ".pgm");
        write_pnm((root / "images" / name).string(), item.pixels);
        csv << name << "," << item.grade << "\n";
    }
}

LabeledImage preprocess_image(const LabeledImage& img, const PreprocessConfig& cfg) {
    cfg.validate();
    const Tensor& px = img.pixels;
    int y0 = px.h, y1 = -1, x0 = px.w, x1 = -1;
    for (int y = 0; y < px.h; ++y) {
        for (int x = 0; x < px.w; ++x) {
            if (luminance(px, y, x) > cfg.crop_threshold) {
                y0 = std::min(y0, y);
                y1 = std::max(y1, y);
                x0 = std::min(x0, x);
                x1 = std::max(x1, x);
            }
        }
    }
    if (y1 < 0) throw DpcnError("no foreground in image '" + img.id + "'");

    const int ch = y1 - y0 + 1, cw = x1 - x0 + 1;
    Tensor crop = Tensor::image(ch, cw, px.c);
    for (int y = 0; y < ch; ++y)
        for (int x = 0; x < cw; ++x)
            for (int k = 0; k < px.c; ++k)
                crop.at(0, y, x, k) = px.at(0, y0 + y, x0 + x, k);

    LabeledImage out;
    out.pixels = resize_bilinear(crop, cfg.target_side, cfg.target_side);
    for (double& v : out.pixels.v) v = std::clamp(v, 0.0, 1.0);
    out.grade = img.grade;
    out.id = img.id;
    return out;
}

LabeledImageSet augment_balance(const LabeledImageSet& set, Rng& rng,
                                const PreprocessConfig& cfg) {
    cfg.validate();
    if (set.items.empty()) throw DpcnError("augment_balance: empty set");
    const std::vector<int> counts = set.class_counts();
    for (int k = 0; k < set.num_classes; ++k)
        if (counts[k] == 0)
            throw DpcnError("augment_balance: class " + std::to_string(k) + " has no samples");
    const int majority = *std::max_element(counts.begin(), counts.end());

    LabeledImageSet out = set;
    for (int k = 0; k < set.num_classes; ++k) {
        const long long cap =
            static_cast<long long>(std::floor(cfg.augment_cap * counts[k] + 1e-9));
        const long long target = std::min<long long>(majority, cap);
        // indices of the originals of this class, in set order
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < set.items.size(); ++i)
            if (set.items[i].grade == k) members.push_back(i);
        long long have = counts[k];
        std::size_t cursor = 0;
        int copy_no = 0;
        while (have < target) {
            const LabeledImage& src = set.items[members[cursor]];
            cursor = (cursor + 1) % members.size();
            const double theta = rng.uniform(-180.0, 180.0);
            LabeledImage aug;
            aug.pixels = rotate_bilinear(src.pixels, theta);
            for (double& v : aug.pixels.v) v = std::clamp(v, 0.0, 1.0);
            aug.grade = src.grade;
            aug.id = src.id + "#aug" + std::to_string(copy_no++);
            out.items.push_back(std::move(aug));
            ++have;
        }
    }
    return out;
}

LabeledImageSet remap_scenario(const LabeledImageSet& set, Scenario s) {
    if (s == Scenario::SC1) return set; // identity for any class count
    if (set.num_classes != 5)
        throw DpcnError("remap_scenario: " + scenario_name(s) + " requires a 5-class set, got " +
                        std::to_string(set.num_classes));
    LabeledImageSet out = set;
    out.num_classes = 2;
    const int cut = (s == Scenario::SC2) ? 1 : 2; // first grade that maps to 1
    for (auto& item : out.items) item.grade = (item.grade >= cut) ? 1 : 0;
    return out;
}

std::tuple<LabeledImageSet, LabeledImageSet, LabeledImageSet>
split_dataset(const LabeledImageSet& set, double train_ratio, double val_ratio,
              double test_ratio, Rng& rng) {
    const double ratios[3] = {train_ratio, val_ratio, test_ratio};
    for (double r : ratios)
        if (!(r > 0.0)) throw DpcnError("split_dataset: ratios must be positive");
    if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9)
        throw DpcnError("split_dataset: ratios must sum to 1");

    LabeledImageSet parts[3];
    for (auto& p : parts) p.num_classes = set.num_classes;

    // Largest-remainder assignment with a running per-split deficit so the
    // overall totals track the exact ratios across classes.
    double exact_cum[3] = {0, 0, 0};
    long long assigned_cum[3] = {0, 0, 0};
    for (int k = 0; k < set.num_classes; ++k) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < set.items.size(); ++i)
            if (set.items[i].grade == k) members.push_back(i);
        const std::size_t n = members.size();
        if (n == 0) continue;
        rng.shuffle(members);

        long long take[3];
        if (n < 3) {
            log::warn("split_dataset: class ", k, " has only ", n,
                      " items; placing them in train");
            take[0] = static_cast<long long>(n);
            take[1] = take[2] = 0;
            for (int s2 = 0; s2 < 3; ++s2) exact_cum[s2] += ratios[s2] * n;
        } else {
            long long remaining = static_cast<long long>(n);
            for (int s2 = 0; s2 < 3; ++s2) {
                exact_cum[s2] += ratios[s2] * n;
                take[s2] = static_cast<long long>(std::floor(ratios[s2] * n + 1e-9));
                remaining -= take[s2];
            }
            while (remaining > 0) {
                int best = 0;
                double best_deficit = -1e300;
                for (int s2 = 0; s2 < 3; ++s2) {
                    const double deficit = exact_cum[s2] - (assigned_cum[s2] + take[s2]);
                    if (deficit > best_deficit + 1e-12) {
                        best_deficit = deficit;
                        best = s2;
                    }
                }
                take[best]++;
                remaining--;
            }
        }
        std::size_t pos = 0;
        for (int s2 = 0; s2 < 3; ++s2) {
            assigned_cum[s2] += take[s2];
            for (long long t = 0; t < take[s2]; ++t)
                parts[s2].items.push_back(set.items[members[pos++]]);
        }
    }
    return {std::move(parts[0]), std::move(parts[1]), std::move(parts[2])};
}

LabeledImageSet generate_toy_dataset(int n_per_class, int num_classes, int side, Rng& rng) {
    if (num_classes < 2 || num_classes > 5)
        throw DpcnError("generate_toy_dataset: C must be in {2..5}");
    if (side < 16) throw DpcnError("generate_toy_dataset: side must be >= 16");
    if (n_per_class < 1) throw DpcnError("generate_toy_dataset: need n_per_class >= 1");

    LabeledImageSet set;
    set.num_classes = num_classes;
    const double pi = 3.14159265358979323846;
    for (int k = 0; k < num_classes; ++k) {
        const double angle = k * pi / num_classes; // k*180/C degrees
        const double ux = std::cos(angle), uy = std::sin(angle);
        for (int i = 0; i < n_per_class; ++i) {
            const double phase = rng.uniform(0.0, 2.0 * pi);
            const double freq = 0.18 * (1.0 + 0.25 * (rng.uniform() - 0.5)); // cycles/pixel
            LabeledImage img;
            img.pixels = Tensor::image(side, side, 1);
            for (int y = 0; y < side; ++y) {
                for (int x = 0; x < side; ++x) {
                    const double t = 2.0 * pi * freq * (ux * x + uy * y) + phase;
                    double v = 0.5 + 0.35 * std::sin(t) + rng.normal(0.0, 0.05);
                    img.pixels.at(0, y, x, 0) = std::clamp(v, 0.0, 1.0);
                }
            }
            img.grade = k;
            img.id = "toy_c" + std::to_string(k) + "_" + std::to_string(i) + ".pgm";
            set.items.push_back(std::move(img));
        }
    }
    return set;
}

} // namespace dpcn
