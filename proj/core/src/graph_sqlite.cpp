#include <sqlite3.h>

#include <memory>

#include "detrace/tracegen.hpp"

namespace detrace {

namespace {

struct DbCloser {
    void operator()(sqlite3* db) const { sqlite3_close(db); }
};
using DbHandle = std::unique_ptr<sqlite3, DbCloser>;

struct StmtCloser {
    void operator()(sqlite3_stmt* s) const { sqlite3_finalize(s); }
};
using Stmt = std::unique_ptr<sqlite3_stmt, StmtCloser>;

[[noreturn]] void db_fail(sqlite3* db, const std::string& what) {
    throw IoError(what + ": " + (db ? sqlite3_errmsg(db) : "unknown sqlite error"));
}

DbHandle open_db(const std::string& path, int flags) {
    sqlite3* raw = nullptr;
    if (sqlite3_open_v2(path.c_str(), &raw, flags, nullptr) != SQLITE_OK) {
        std::string msg = raw ? sqlite3_errmsg(raw) : "cannot open";
        sqlite3_close(raw);
        throw IoError("sqlite open " + path + ": " + msg);
    }
    return DbHandle(raw);
}

void exec(sqlite3* db, const char* sql) {
    if (sqlite3_exec(db, sql, nullptr, nullptr, nullptr) != SQLITE_OK) {
        db_fail(db, sql);
    }
}

Stmt prepare(sqlite3* db, const char* sql) {
    sqlite3_stmt* raw = nullptr;
    if (sqlite3_prepare_v2(db, sql, -1, &raw, nullptr) != SQLITE_OK) db_fail(db, sql);
    return Stmt(raw);
}

void bind_text(sqlite3* db, sqlite3_stmt* s, int idx, const std::string& v) {
    if (sqlite3_bind_text(s, idx, v.data(), static_cast<int>(v.size()),
                          SQLITE_TRANSIENT) != SQLITE_OK) {
        db_fail(db, "bind");
    }
}

}  // namespace

void export_graph_sqlite(const StateGraph& graph, const std::string& model,
                         const std::string& path) {
    DbHandle db = open_db(path, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE);
    exec(db.get(), "BEGIN");
    exec(db.get(), "DROP TABLE IF EXISTS meta");
    exec(db.get(), "DROP TABLE IF EXISTS state");
    exec(db.get(), "DROP TABLE IF EXISTS transition");
    exec(db.get(), "CREATE TABLE meta(key TEXT PRIMARY KEY, value TEXT)");
    exec(db.get(), "CREATE TABLE state(id INTEGER PRIMARY KEY, json TEXT NOT NULL)");
    exec(db.get(),
         "CREATE TABLE transition(from_id INTEGER NOT NULL, action_json TEXT NOT NULL,"
         " to_id INTEGER NOT NULL)");

    {
        Stmt s = prepare(db.get(), "INSERT INTO meta VALUES('model', ?1)");
        bind_text(db.get(), s.get(), 1, model);
        if (sqlite3_step(s.get()) != SQLITE_DONE) db_fail(db.get(), "insert meta");
    }
    // state.json holds the same record as a graph-file state line.
    Stmt ins_state = prepare(db.get(), "INSERT INTO state VALUES(?1, ?2)");
    for (const auto& [id, state] : graph.states) {
        CanonValue::Map m;
        m.emplace("id", static_cast<std::int64_t>(id));
        m.emplace("initial", graph.initial.contains(id));
        m.emplace("type", "state");
        m.emplace("vars", CanonValue(state.vars));
        sqlite3_bind_int64(ins_state.get(), 1, static_cast<std::int64_t>(id));
        bind_text(db.get(), ins_state.get(), 2, CanonValue(std::move(m)).encode());
        if (sqlite3_step(ins_state.get()) != SQLITE_DONE) db_fail(db.get(), "insert state");
        sqlite3_reset(ins_state.get());
    }
    Stmt ins_trans = prepare(db.get(), "INSERT INTO transition VALUES(?1, ?2, ?3)");
    for (const Transition& t : graph.transitions) {
        sqlite3_bind_int64(ins_trans.get(), 1, static_cast<std::int64_t>(t.from));
        bind_text(db.get(), ins_trans.get(), 2, t.action.encode());
        sqlite3_bind_int64(ins_trans.get(), 3, static_cast<std::int64_t>(t.to));
        if (sqlite3_step(ins_trans.get()) != SQLITE_DONE) {
            db_fail(db.get(), "insert transition");
        }
        sqlite3_reset(ins_trans.get());
    }
    exec(db.get(), "COMMIT");
}

GraphFile import_graph_sqlite(const std::string& path) {
    DbHandle db = open_db(path, SQLITE_OPEN_READONLY);
    GraphFile gf;
    try {
        {
            Stmt s = prepare(db.get(), "SELECT value FROM meta WHERE key='model'");
            if (sqlite3_step(s.get()) == SQLITE_ROW) {
                gf.model = reinterpret_cast<const char*>(sqlite3_column_text(s.get(), 0));
            }
        }
        Stmt states = prepare(db.get(), "SELECT id, json FROM state ORDER BY id");
        while (sqlite3_step(states.get()) == SQLITE_ROW) {
            StateId id = static_cast<StateId>(sqlite3_column_int64(states.get(), 0));
            CanonValue rec = CanonValue::decode(
                reinterpret_cast<const char*>(sqlite3_column_text(states.get(), 1)));
            State st;
            st.vars = rec.at("vars").as_map();
            gf.graph.states.emplace(id, std::move(st));
            if (rec.at("initial").as_bool()) gf.graph.initial.insert(id);
        }
        Stmt trans = prepare(db.get(),
                             "SELECT from_id, action_json, to_id FROM transition");
        while (sqlite3_step(trans.get()) == SQLITE_ROW) {
            Transition t;
            t.from = static_cast<StateId>(sqlite3_column_int64(trans.get(), 0));
            t.action = Action::from_value(CanonValue::decode(
                reinterpret_cast<const char*>(sqlite3_column_text(trans.get(), 1))));
            t.to = static_cast<StateId>(sqlite3_column_int64(trans.get(), 2));
            gf.graph.transitions.push_back(std::move(t));
        }
        gf.graph.validate();
    } catch (const ParseError& e) {
        throw FormatError(std::string("bad sqlite graph record: ") + e.what());
    }
    gf.digest = graph_digest(gf.graph, gf.model);
    return gf;
}

}  // namespace detrace
