#pragma once

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "anchorlab/kitti.hpp"
#include "anchorlab/rng.hpp"

namespace testfx {

// Scratch directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<unsigned> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("anchorlab_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path sub(const std::string& name) const {
        auto p = path_ / name;
        std::filesystem::create_directories(p);
        return p;
    }

private:
    std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

// Five-frame evaluation fixture with a planted TP/FP pattern across
// difficulty bins. Expected AP under R11 at IoU 0.7 (enumerated by hand):
//   Easy     43/55 = 0.78181818...   (gt 5, tp 4, fp 2)
//   Moderate 17/22 = 0.77272727...   (gt 6, tp 5, fp 2)
//   Hard     59/77 = 0.76623376...   (gt 7, tp 6, fp 2)
inline void write_five_frame_gt(const std::filesystem::path& dir) {
    write_text(dir / "000000.txt",
               "Car 0.00 0 -1.50 100.00 100.00 200.00 150.00 1.50 1.60 3.80 -1.00 1.70 20.00 -1.50\n"
               "Car 0.00 0 -1.20 300.00 145.00 380.00 190.00 1.40 1.60 3.60 2.00 1.70 25.00 -1.20\n");
    write_text(dir / "000001.txt",
               "Car 0.00 0 1.00 150.00 80.00 260.00 140.00 1.60 1.70 4.00 -3.00 1.60 15.00 1.00\n"
               "Car 0.10 1 0.50 400.00 100.00 460.00 130.00 1.45 1.60 3.70 4.00 1.65 30.00 0.50\n");
    write_text(dir / "000002.txt",
               "Car 0.40 2 -0.80 500.00 120.00 530.00 148.00 1.50 1.60 3.90 6.00 1.70 35.00 -0.80\n");
    write_text(dir / "000003.txt",
               "DontCare -1.00 -1 -10.00 900.00 150.00 1000.00 200.00 -1.00 -1.00 -1.00 -1000.00 "
               "-1000.00 -1000.00 -10.00\n"
               "Car 0.00 0 0.30 100.00 200.00 220.00 260.00 1.55 1.65 3.85 -5.00 1.75 12.00 0.30\n");
    write_text(dir / "000004.txt",
               "Car 0.00 0 2.00 700.00 200.00 740.00 220.00 1.40 1.55 3.50 8.00 1.80 60.00 2.00\n"
               "Car 0.00 0 -2.00 200.00 100.00 320.00 170.00 1.60 1.70 4.10 -2.50 1.65 18.00 -2.00\n"
               "Pedestrian 0.00 0 1.20 50.00 50.00 80.00 120.00 1.75 0.60 0.80 -6.00 1.60 10.00 1.20\n");
}

inline void write_five_frame_det(const std::filesystem::path& dir) {
    const std::string tail = " -1.00 -1.00 -1.00 -1000.00 -1000.00 -1000.00 -10.00 ";
    write_text(dir / "000000.txt",
               "Car -1.00 -1 -10.00 100.00 100.00 200.00 150.00" + tail + "0.95\n" +
               "Car -1.00 -1 -10.00 300.00 145.00 380.00 190.00" + tail + "0.90\n");
    write_text(dir / "000001.txt",
               "Car -1.00 -1 -10.00 155.00 80.00 265.00 140.00" + tail + "0.85\n" +
               "Car -1.00 -1 -10.00 600.00 50.00 700.00 100.00" + tail + "0.80\n" +
               "Car -1.00 -1 -10.00 402.00 100.00 462.00 130.00" + tail + "0.78\n");
    write_text(dir / "000002.txt",
               "Car -1.00 -1 -10.00 500.00 120.00 530.00 148.00" + tail + "0.75\n");
    write_text(dir / "000003.txt",
               "Car -1.00 -1 -10.00 910.00 155.00 1000.00 200.00" + tail + "0.70\n" +
               "Car -1.00 -1 -10.00 115.00 200.00 235.00 260.00" + tail + "0.65\n");
    write_text(dir / "000004.txt",
               "Pedestrian -1.00 -1 -10.00 50.00 50.00 80.00 120.00" + tail + "0.99\n" +
               "Car -1.00 -1 -10.00 700.00 200.00 740.00 220.00" + tail + "0.60\n" +
               "Car -1.00 -1 -10.00 1000.00 250.00 1100.00 300.00" + tail + "0.55\n");
}

// Deterministic 10-frame / 100-car dataset on a 1242x375 canvas. Objects sit
// in disjoint horizontal slots so matching stays unambiguous; heights,
// occlusion and truncation cycle through patterns that populate every
// difficulty bin.
inline void write_standard_fixture(const std::filesystem::path& dir) {
    anchorlab::SplitMix64 rng(0x5eedULL);
    for (int frame = 0; frame < 10; ++frame) {
        std::vector<anchorlab::GroundTruthObject> objects;
        for (int slot = 0; slot < 10; ++slot) {
            anchorlab::GroundTruthObject obj;
            obj.class_name = "Car";
            const int pattern = (frame * 10 + slot) % 5;
            switch (pattern) {
                case 0: obj.occlusion = 0; obj.truncation = 0.00; break;  // easy
                case 1: obj.occlusion = 1; obj.truncation = 0.20; break;  // moderate
                case 2: obj.occlusion = 2; obj.truncation = 0.45; break;  // hard
                case 3: obj.occlusion = 0; obj.truncation = 0.10; break;  // easy
                default: obj.occlusion = 1; obj.truncation = 0.05; break; // moderate
            }
            const double width = 50.0 + std::floor(rng.next_double() * 60.0);   // 50..109
            const double height = 42.0 + std::floor(rng.next_double() * 40.0);  // 42..81
            const double left = 8.0 + 122.0 * slot;
            const double top = 60.0 + std::floor(rng.next_double() * 180.0);    // stays in image
            obj.bbox = {left, top, left + width, top + height};
            obj.alpha = -1.5;
            obj.dim_height = 1.5;
            obj.dim_width = 1.6;
            obj.dim_length = 3.8;
            obj.loc_x = 0.0;
            obj.loc_y = 1.7;
            obj.loc_z = 10.0 + slot;
            obj.rotation_y = -1.5;
            objects.push_back(obj);
        }
        char name[16];
        std::snprintf(name, sizeof(name), "%06d.txt", frame);
        write_text(dir / name, anchorlab::serialize(std::span<const anchorlab::GroundTruthObject>(objects)));
    }
}

}  // namespace testfx
