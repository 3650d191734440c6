#pragma once

// Append-only announcement board (blockchain stand-in) and the salted
// commit-and-reveal scheme for peer rankings.
//
// Commitments hash the canonical ranking serialization: round as a
// big-endian u32, then the peer ids in rank order as big-endian u32s, then
// the 16 salt bytes (when salting is enabled). Hashing the ranking alone
// would be invertible by enumerating the N! possible orders, so the salt is
// on by default and its absence is a documented, test-covered weakness.

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "wpfed/lsh.hpp"
#include "wpfed/ranking.hpp"
#include "wpfed/sha256.hpp"

namespace wpfed {

using Salt = std::array<uint8_t, 16>;

/// Per-round public record: the client's LSH code and its ranking commitment.
struct Announcement {
    int client_id = -1;
    int round = 0;
    LshCode lsh_code;
    Digest256 commitment{};
};

/// Deferred disclosure of the ranking committed in `round`, published no
/// earlier than round + 1.
struct Reveal {
    int client_id = -1;
    int round = 0;
    RankingList ranking;
    Salt salt{};
};

namespace detail {

inline void put_u32_be(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

inline uint32_t get_u32_be(const std::vector<uint8_t>& in, size_t pos) {
    return (static_cast<uint32_t>(in[pos]) << 24) | (static_cast<uint32_t>(in[pos + 1]) << 16) |
           (static_cast<uint32_t>(in[pos + 2]) << 8) | static_cast<uint32_t>(in[pos + 3]);
}

}  // namespace detail

inline std::vector<uint8_t> canonical_ranking_bytes(const RankingList& ranking, const Salt& salt,
                                                    bool salted) {
    std::vector<uint8_t> bytes;
    bytes.reserve(4 + 4 * ranking.ranked_peers.size() + (salted ? salt.size() : 0));
    detail::put_u32_be(bytes, static_cast<uint32_t>(ranking.round));
    for (int peer : ranking.ranked_peers) {
        detail::put_u32_be(bytes, static_cast<uint32_t>(peer));
    }
    if (salted) {
        bytes.insert(bytes.end(), salt.begin(), salt.end());
    }
    return bytes;
}

inline Digest256 commit(const RankingList& ranking, const Salt& salt, bool salted = true) {
    return Sha256::digest(canonical_ranking_bytes(ranking, salt, salted));
}

/// True iff the revealed ranking and salt reproduce the committed digest.
inline bool verify_reveal(const Announcement& announcement, const Reveal& reveal,
                          bool salted = true) {
    if (announcement.client_id != reveal.client_id || announcement.round != reveal.round) {
        throw InvalidInputError("verify_reveal: announcement/reveal identity mismatch");
    }
    if (reveal.ranking.round != reveal.round || reveal.ranking.owner != reveal.client_id) {
        return false;
    }
    return commit(reveal.ranking, reveal.salt, salted) == announcement.commitment;
}

/// In-process append-only log with round barriers. Announcements are accepted
/// only for the current publishing round; reveals only for earlier rounds.
class Board {
public:
    using Record = std::variant<Announcement, Reveal>;

    void begin_round(int round) {
        if (round <= current_round_) {
            throw BoardError("begin_round: rounds must advance");
        }
        current_round_ = round;
    }

    int current_round() const { return current_round_; }

    void publish(const Announcement& a) {
        if (a.round != current_round_) {
            throw BoardError("publish: announcement outside its publishing phase");
        }
        insert_key(a.round, a.client_id, 0);
        log_.emplace_back(a);
    }

    void publish(const Reveal& r) {
        if (r.round > current_round_ - 1) {
            throw BoardError("publish: reveal earlier than its reveal phase");
        }
        insert_key(r.round, r.client_id, 1);
        log_.emplace_back(r);
    }

    /// All records labeled with the given round, in append order.
    std::vector<Record> fetch_round(int round) const {
        std::vector<Record> out;
        for (const auto& rec : log_) {
            if (record_round(rec) == round) out.push_back(rec);
        }
        return out;
    }

    std::map<int, Announcement> announcements(int round) const {
        std::map<int, Announcement> out;
        for (const auto& rec : log_) {
            if (const auto* a = std::get_if<Announcement>(&rec)) {
                if (a->round == round) out.emplace(a->client_id, *a);
            }
        }
        return out;
    }

    std::map<int, Reveal> reveals(int round) const {
        std::map<int, Reveal> out;
        for (const auto& rec : log_) {
            if (const auto* r = std::get_if<Reveal>(&rec)) {
                if (r->round == round) out.emplace(r->client_id, *r);
            }
        }
        return out;
    }

    const std::vector<Record>& log() const { return log_; }
    size_t size() const { return log_.size(); }

private:
    static int record_round(const Record& rec) {
        return std::visit([](const auto& r) { return r.round; }, rec);
    }

    void insert_key(int round, int client, int kind) {
        if (!keys_.emplace(round, client, kind).second) {
            throw BoardError("publish: duplicate record for (client, round, kind)");
        }
    }

    std::vector<Record> log_;
    std::set<std::tuple<int, int, int>> keys_;
    int current_round_ = 0;
};

// --- board dump / replay --------------------------------------------------
// Line format: round|client|kind|payload-hex
//   announce payload: u16 bit count, packed code bits (MSB first), 32-byte digest
//   reveal payload:   u16 peer count, u32 peer ids in rank order, 16-byte salt
// A header line records the hash algorithm and salting mode for audits.

inline std::string announce_payload_hex(const Announcement& a) {
    std::vector<uint8_t> bytes;
    int b = a.lsh_code.size();
    bytes.push_back(static_cast<uint8_t>(b >> 8));
    bytes.push_back(static_cast<uint8_t>(b));
    for (int i = 0; i < b; i += 8) {
        uint8_t byte = 0;
        for (int j = 0; j < 8; ++j) {
            byte <<= 1;
            if (i + j < b && a.lsh_code.bits[i + j]) byte |= 1;
        }
        bytes.push_back(byte);
    }
    bytes.insert(bytes.end(), a.commitment.begin(), a.commitment.end());
    return to_hex(bytes);
}

inline std::string reveal_payload_hex(const Reveal& r) {
    std::vector<uint8_t> bytes;
    bytes.push_back(static_cast<uint8_t>(r.ranking.ranked_peers.size() >> 8));
    bytes.push_back(static_cast<uint8_t>(r.ranking.ranked_peers.size()));
    for (int peer : r.ranking.ranked_peers) {
        detail::put_u32_be(bytes, static_cast<uint32_t>(peer));
    }
    bytes.insert(bytes.end(), r.salt.begin(), r.salt.end());
    return to_hex(bytes);
}

inline void dump_board(const Board& board, std::ostream& os, bool salted) {
    os << "# wpfed-board v1 hash=" << kHashAlgorithm << " salted=" << (salted ? 1 : 0) << "\n";
    for (const auto& rec : board.log()) {
        if (const auto* a = std::get_if<Announcement>(&rec)) {
            os << a->round << '|' << a->client_id << "|announce|" << announce_payload_hex(*a)
               << '\n';
        } else {
            const auto& r = std::get<Reveal>(rec);
            os << r.round << '|' << r.client_id << "|reveal|" << reveal_payload_hex(r) << '\n';
        }
    }
}

struct BoardDump {
    bool salted = true;
    std::string hash_algorithm = kHashAlgorithm;
    std::vector<Announcement> announcements;
    std::vector<Reveal> reveals;
};

inline BoardDump parse_board_dump(std::istream& is) {
    BoardDump dump;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::stringstream hs(line.substr(1));
            std::string tok;
            while (hs >> tok) {
                if (tok.rfind("salted=", 0) == 0) dump.salted = tok.substr(7) == "1";
                if (tok.rfind("hash=", 0) == 0) dump.hash_algorithm = tok.substr(5);
            }
            continue;
        }
        std::stringstream ss(line);
        std::string round_s, client_s, kind, payload;
        if (!std::getline(ss, round_s, '|') || !std::getline(ss, client_s, '|') ||
            !std::getline(ss, kind, '|') || !std::getline(ss, payload, '|')) {
            throw InvalidInputError("malformed board dump line: " + line);
        }
        int round = std::stoi(round_s);
        int client = std::stoi(client_s);
        std::vector<uint8_t> bytes = from_hex(payload);
        if (kind == "announce") {
            if (bytes.size() < 2) throw InvalidInputError("truncated announce payload");
            int b = (bytes[0] << 8) | bytes[1];
            size_t code_bytes = (b + 7) / 8;
            if (bytes.size() != 2 + code_bytes + 32) {
                throw InvalidInputError("announce payload size mismatch");
            }
            Announcement a;
            a.client_id = client;
            a.round = round;
            a.lsh_code.bits.resize(b);
            for (int i = 0; i < b; ++i) {
                a.lsh_code.bits[i] = (bytes[2 + i / 8] >> (7 - i % 8)) & 1;
            }
            std::copy(bytes.end() - 32, bytes.end(), a.commitment.begin());
            dump.announcements.push_back(std::move(a));
        } else if (kind == "reveal") {
            if (bytes.size() < 2) throw InvalidInputError("truncated reveal payload");
            int count = (bytes[0] << 8) | bytes[1];
            if (bytes.size() != 2 + 4 * static_cast<size_t>(count) + 16) {
                throw InvalidInputError("reveal payload size mismatch");
            }
            Reveal r;
            r.client_id = client;
            r.round = round;
            r.ranking.owner = client;
            r.ranking.round = round;
            for (int i = 0; i < count; ++i) {
                r.ranking.ranked_peers.push_back(
                    static_cast<int>(detail::get_u32_be(bytes, 2 + 4 * static_cast<size_t>(i))));
            }
            std::copy(bytes.end() - 16, bytes.end(), r.salt.begin());
            dump.reveals.push_back(std::move(r));
        } else {
            throw InvalidInputError("unknown record kind '" + kind + "'");
        }
    }
    return dump;
}

struct DumpAudit {
    int pairs_checked = 0;
    int pairs_passed = 0;
    int unmatched_reveals = 0;
    std::vector<std::pair<int, int>> failures;  // (client, round)
};

/// Re-checks every commitment/reveal pair in a board dump.
inline DumpAudit audit_dump(const BoardDump& dump) {
    DumpAudit audit;
    std::map<std::pair<int, int>, const Announcement*> by_key;
    for (const auto& a : dump.announcements) {
        by_key[{a.client_id, a.round}] = &a;
    }
    for (const auto& r : dump.reveals) {
        auto it = by_key.find({r.client_id, r.round});
        if (it == by_key.end()) {
            ++audit.unmatched_reveals;
            continue;
        }
        ++audit.pairs_checked;
        if (verify_reveal(*it->second, r, dump.salted)) {
            ++audit.pairs_passed;
        } else {
            audit.failures.emplace_back(r.client_id, r.round);
        }
    }
    return audit;
}

}  // namespace wpfed
