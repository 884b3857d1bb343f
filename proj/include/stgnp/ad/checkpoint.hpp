#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "stgnp/ad/params.hpp"
#include "stgnp/io/binary.hpp"

namespace stgnp::ad {

/// Checkpoint = plain-text manifest (metadata + named shapes) next to a single
/// binary blob of little-endian doubles concatenated in manifest order.
/// Files: <stem>.manifest and <stem>.bin.
struct Checkpoint {
    std::vector<std::pair<std::string, std::string>> metadata;
    std::vector<std::string> names;
    std::vector<Array> arrays;

    void set_meta(const std::string& key, const std::string& value) {
        for (auto& kv : metadata) {
            if (kv.first == key) {
                kv.second = value;
                return;
            }
        }
        metadata.emplace_back(key, value);
    }

    std::string meta(const std::string& key) const {
        for (const auto& kv : metadata)
            if (kv.first == key) return kv.second;
        throw format_error("checkpoint: missing metadata key '" + key + "'");
    }

    bool has_meta(const std::string& key) const {
        for (const auto& kv : metadata)
            if (kv.first == key) return true;
        return false;
    }

    void save(const std::filesystem::path& stem) const {
        std::ofstream man(stem.string() + ".manifest");
        if (!man) throw format_error("cannot write " + stem.string() + ".manifest");
        man << "format = stgnp-checkpoint-1\n";
        for (const auto& [k, v] : metadata) man << "meta " << k << " = " << v << "\n";
        std::uint64_t total = 0;
        for (std::size_t i = 0; i < arrays.size(); ++i) {
            man << "array " << names[i] << " " << arrays[i].ndim();
            for (std::size_t d : arrays[i].shape()) man << " " << d;
            man << "\n";
            total += arrays[i].numel();
        }
        std::ofstream bin(stem.string() + ".bin", std::ios::binary);
        if (!bin) throw format_error("cannot write " + stem.string() + ".bin");
        bin.write("STGNPBIN", 8);
        io::write_u64_le(bin, total);
        for (const Array& a : arrays)
            for (std::size_t i = 0; i < a.numel(); ++i) io::write_f64_le(bin, a[i]);
        if (!bin || !man) throw format_error("checkpoint write failed at " + stem.string());
    }

    static Checkpoint load(const std::filesystem::path& stem) {
        std::ifstream man(stem.string() + ".manifest");
        if (!man) throw format_error("cannot open " + stem.string() + ".manifest");
        Checkpoint ck;
        std::string line;
        bool saw_format = false;
        while (std::getline(man, line)) {
            if (line.empty()) continue;
            std::istringstream ls(line);
            std::string head;
            ls >> head;
            if (head == "format") {
                std::string eq, val;
                ls >> eq >> val;
                if (val != "stgnp-checkpoint-1")
                    throw format_error("checkpoint: unsupported format '" + val + "'");
                saw_format = true;
            } else if (head == "meta") {
                std::string key;
                ls >> key;
                std::string rest;
                std::getline(ls, rest);
                const auto eq = rest.find('=');
                if (eq == std::string::npos) throw format_error("checkpoint: bad meta line: " + line);
                std::string value = rest.substr(eq + 1);
                while (!value.empty() && value.front() == ' ') value.erase(value.begin());
                ck.metadata.emplace_back(key, value);
            } else if (head == "array") {
                std::string name;
                std::size_t ndim = 0;
                ls >> name >> ndim;
                std::vector<std::size_t> shape(ndim);
                for (auto& d : shape) ls >> d;
                if (!ls) throw format_error("checkpoint: bad array line: " + line);
                ck.names.push_back(name);
                ck.arrays.emplace_back(shape);
            } else {
                throw format_error("checkpoint: unknown manifest entry '" + head + "'");
            }
        }
        if (!saw_format) throw format_error("checkpoint: manifest missing format line");

        std::ifstream bin(stem.string() + ".bin", std::ios::binary);
        if (!bin) throw format_error("cannot open " + stem.string() + ".bin");
        char magic[8];
        bin.read(magic, 8);
        if (!bin || std::string(magic, 8) != "STGNPBIN")
            throw format_error("checkpoint: bad binary magic in " + stem.string() + ".bin");
        const std::uint64_t total = io::read_u64_le(bin);
        std::uint64_t expect = 0;
        for (const Array& a : ck.arrays) expect += a.numel();
        if (total != expect)
            throw format_error("checkpoint: payload count " + std::to_string(total) +
                               " does not match manifest total " + std::to_string(expect));
        for (Array& a : ck.arrays)
            for (std::size_t i = 0; i < a.numel(); ++i) a[i] = io::read_f64_le(bin);
        if (!bin) throw format_error("checkpoint: truncated binary payload");
        return ck;
    }

    /// Copy array contents into a parameter store with identical layout.
    void restore_into(ParamStore& store) const {
        if (store.size() != arrays.size())
            throw format_error("checkpoint: parameter count mismatch (" +
                               std::to_string(arrays.size()) + " stored, " +
                               std::to_string(store.size()) + " expected)");
        for (std::size_t i = 0; i < arrays.size(); ++i) {
            const int idx = static_cast<int>(i);
            if (store.name(idx) != names[i] || !store.array(idx).same_shape(arrays[i]))
                throw format_error("checkpoint: layout mismatch at '" + names[i] + "'");
            store.array(idx) = arrays[i];
        }
    }

    static Checkpoint from_store(const ParamStore& store) {
        Checkpoint ck;
        ck.names = store.names();
        ck.arrays = store.arrays();
        return ck;
    }
};

}  // namespace stgnp::ad
