//! The operation catalogue: every operation with its HTTP route and CLI
//! command. Tests walk this list to keep the two surfaces in step.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Operation {
    pub name: &'static str,
    pub method: &'static str,
    /// Route template; `{table}` is a table id or unique title.
    pub path: &'static str,
    /// Subcommand path under `fieldlog`.
    pub cli: &'static [&'static str],
}

const fn op(name: &'static str, method: &'static str, path: &'static str, cli: &'static [&'static str]) -> Operation {
    Operation {
        name,
        method,
        path,
        cli,
    }
}

pub const OPERATIONS: &[Operation] = &[
    op("create_table", "POST", "/tables", &["table", "create"]),
    op("list_tables", "GET", "/tables", &["table", "list"]),
    op("show_table", "GET", "/tables/{table}", &["table", "show"]),
    op("add_column", "POST", "/tables/{table}/columns", &["column", "add"]),
    op("add_entry", "POST", "/tables/{table}/entries", &["entry", "add"]),
    op("annotate", "POST", "/tables/{table}/annotations", &["note", "add"]),
    op("feed", "GET", "/feed", &["feed"]),
    op("sync_status", "GET", "/sync/status", &["sync", "status"]),
    op("sync_run_once", "POST", "/sync/flush", &["sync", "run-once"]),
    op(
        "requeue_failed",
        "POST",
        "/sync/requeue-failed",
        &["sync", "requeue-failed"],
    ),
    op("get_connectivity", "GET", "/sim/connectivity", &["sim", "show"]),
    op("set_connectivity", "PUT", "/sim/connectivity", &["sim", "set"]),
    op("harvest", "POST", "/harvest", &["harvest"]),
    op("export", "GET", "/tables/{table}/export", &["export"]),
    op("chunk_preview", "POST", "/chunk-preview", &["chunk-preview"]),
];
