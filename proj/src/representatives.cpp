#include "dpcn/representatives.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "dpcn/dataset.hpp"

namespace fs = std::filesystem;

namespace dpcn {

namespace {

std::vector<std::size_t> representatives_for_class(const LabeledImageSet& train,
                                                   const std::vector<std::size_t>& members,
                                                   Rng class_rng) {
    if (members.size() == 1) return {members[0]};

    std::vector<std::vector<double>> descriptors;
    descriptors.reserve(members.size());
    for (std::size_t idx : members)
        descriptors.push_back(compute_descriptor(train.items[idx]).values);

    const std::size_t k_max = std::min<std::size_t>(10, members.size() - 1);
    Rng gap_rng = class_rng.child(1);
    const GapReport gap = gap_statistic(descriptors, k_max, 10, gap_rng);

    Rng pam_rng = class_rng.child(2);
    const MedoidAssignment pam = k_medoids(descriptors, gap.chosen_k, pam_rng);

    std::vector<std::size_t> out;
    out.reserve(pam.medoid_indices.size());
    for (std::size_t m : pam.medoid_indices) out.push_back(members[m]);
    return out;
}

} // namespace

RepresentativeSet select_representatives(const LabeledImageSet& train, Rng& rng,
                                         int threads) {
    if (train.items.empty()) throw DpcnError("select_representatives: empty training set");

    std::vector<std::vector<std::size_t>> members(train.num_classes);
    for (std::size_t i = 0; i < train.items.size(); ++i)
        members[train.items[i].grade].push_back(i);

    std::vector<std::vector<std::size_t>> chosen(train.num_classes);
    const auto run_class = [&](int k) {
        if (!members[k].empty())
            chosen[k] = representatives_for_class(train, members[k], rng.child(k));
    };
    if (threads <= 1) {
        for (int k = 0; k < train.num_classes; ++k) run_class(k);
    } else {
        std::vector<std::thread> pool;
        std::atomic<int> next{0};
        const int nworkers = std::min(threads, train.num_classes);
        for (int t = 0; t < nworkers; ++t) {
            pool.emplace_back([&] {
                for (int k = next.fetch_add(1); k < train.num_classes; k = next.fetch_add(1))
                    run_class(k);
            });
        }
        for (auto& th : pool) th.join();
    }

    RepresentativeSet reps;
    reps.num_classes = train.num_classes;
    for (int k = 0; k < train.num_classes; ++k) {
        for (std::size_t idx : chosen[k]) reps.images.push_back(train.items[idx]);
        if (!chosen[k].empty()) reps.per_class_counts[k] = static_cast<int>(chosen[k].size());
    }
    return reps;
}

void write_representatives(const std::string& dir, const RepresentativeSet& reps) {
    fs::create_directories(fs::path(dir) / "images");
    nlohmann::json manifest = nlohmann::json::array();
    for (const auto& [cls, count] : reps.per_class_counts) {
        nlohmann::json entry;
        entry["class"] = cls;
        nlohmann::json ids = nlohmann::json::array();
        for (const auto& img : reps.images)
            if (img.grade == cls) ids.push_back(img.id);
        entry["ids"] = std::move(ids);
        manifest.push_back(std::move(entry));
        (void)count;
    }
    std::ofstream out(fs::path(dir) / "manifest.json", std::ios::binary);
    if (!out) throw DpcnError("cannot write representatives manifest in '" + dir + "'");
    out << manifest.dump(2) << "\n";
    for (const auto& img : reps.images) {
        std::string name = img.id;
        std::replace(name.begin(), name.end(), '/', '_');
        const bool has_ext = name.size() > 4 &&
            (name.compare(name.size() - 4, 4, ".pgm") == 0 ||
             name.compare(name.size() - 4, 4, ".ppm") == 0);
        if (!has_ext) name += (img.pixels.c == 3 ? ".ppm" : ".pgm");
        write_pnm((fs::path(dir) / "images" / name).string(), img.pixels);
    }
}

} // namespace dpcn
