// SPDX-License-Identifier: Apache-2.0
#include "lexeval/text_util.hpp"

#include "lexeval/errors.hpp"

#include <atomic>
#include <cctype>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace lexeval {

bool is_ascii_space(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_ascii_punct(unsigned char c) {
    return c < 0x80 && std::ispunct(c) != 0;
}

std::vector<WordSpan> split_words(std::string_view text) {
    std::vector<WordSpan> words;
    std::size_t i = 0;
    while (i < text.size()) {
        if (is_ascii_space(static_cast<unsigned char>(text[i]))) {
            ++i;
            continue;
        }
        std::size_t begin = i;
        while (i < text.size() && !is_ascii_space(static_cast<unsigned char>(text[i]))) {
            ++i;
        }
        words.push_back({begin, i});
    }
    return words;
}

std::string normalize_match_text(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (unsigned char c : text) {
        if (is_ascii_space(c)) {
            if (!out.empty()) {
                pending_space = true;
            }
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

std::string normalize_needle(std::string_view text) {
    std::string norm = normalize_match_text(text);
    std::size_t begin = 0;
    std::size_t end = norm.size();
    while (begin < end && (is_ascii_punct(static_cast<unsigned char>(norm[begin])) ||
                           norm[begin] == ' ')) {
        ++begin;
    }
    while (end > begin && (is_ascii_punct(static_cast<unsigned char>(norm[end - 1])) ||
                           norm[end - 1] == ' ')) {
        --end;
    }
    return norm.substr(begin, end - begin);
}

std::vector<std::string> normalized_word_tokens(std::string_view text) {
    std::string norm = normalize_match_text(text);
    std::vector<std::string> tokens;
    for (const WordSpan& w : split_words(norm)) {
        std::string tok = norm.substr(w.begin, w.end - w.begin);
        // strip edge punctuation so "decree," matches "decree"
        std::size_t b = 0;
        std::size_t e = tok.size();
        while (b < e && is_ascii_punct(static_cast<unsigned char>(tok[b]))) ++b;
        while (e > b && is_ascii_punct(static_cast<unsigned char>(tok[e - 1]))) --e;
        if (e > b) {
            tokens.push_back(tok.substr(b, e - b));
        }
    }
    return tokens;
}

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string fnv1a64_hex(std::string_view data) {
    static const char* digits = "0123456789abcdef";
    std::uint64_t h = fnv1a64(data);
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[h & 0xF];
        h >>= 4;
    }
    return out;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InvalidArgument("cannot read file: " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw InvalidArgument("cannot write file: " + tmp.string());
        }
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) {
            throw InvalidArgument("write failed: " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
    if (n == 0) {
        return;
    }
    if (workers <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&]() {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) {
                return;
            }
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) {
                    first_error = std::current_exception();
                }
            }
        }
    };
    std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    std::vector<std::thread> threads;
    threads.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        threads.emplace_back(worker);
    }
    for (std::thread& t : threads) {
        t.join();
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
}

} // namespace lexeval
