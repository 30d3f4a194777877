"""
datadep dashboard: read-only view of declared data dependencies
Run with: streamlit run app.py
"""

import os

import pandas as pd
import streamlit as st

from datadep.config import get_settings, load_env_file
from datadep.db_utils import get_ledger
from datadep.errors import DataDepError
from datadep.locate import default_load_path, planned_store_dir, with_store
from datadep.manifest import load_manifest
from datadep.status import as_dict, dep_status, list_rows
from datadep.text_cleaner import format_size

st.set_page_config(
    page_title="datadep - Data Dependencies",
    page_icon="📦",
    layout="wide",
)


def load_state(manifest_path: str):
    """
    Collect everything the page shows

    Args:
        manifest_path: Path to DataDeps.toml

    Returns:
        (registry, load_path, store) tuple
    """
    env = dict(os.environ)
    registry = load_manifest(manifest_path).to_registry()
    load_path = with_store(default_load_path(env), env)
    return registry, load_path, planned_store_dir(load_path, env)


def main():
    load_env_file()
    settings = get_settings()

    st.title("📦 Data Dependencies")

    with st.sidebar:
        st.header("⚙️ Settings")
        manifest_path = st.text_input("Manifest", value=settings.manifest_path)

    try:
        registry, load_path, store = load_state(manifest_path)
    except DataDepError as e:
        st.error(str(e))
        return

    st.subheader("Declared")
    declared = pd.DataFrame([as_dict(r) for r in list_rows(registry)])
    st.dataframe(declared, use_container_width=True)

    st.subheader("Status")
    status = pd.DataFrame(
        [as_dict(dep_status(spec, load_path)) for spec in registry],
        columns=["name", "state", "origin", "path", "fetched_at"],
    )
    st.dataframe(status, use_container_width=True)

    st.subheader("Load path")
    st.dataframe(
        pd.DataFrame(
            [{"directory": e.directory, "origin": e.origin.value} for e in load_path]
        ),
        use_container_width=True,
    )

    if store is None:
        st.info("No writable store configured.")
        return

    ledger = get_ledger(store, create=False)
    if ledger is None:
        st.info(f"Nothing has been fetched into {store} yet.")
        return

    stats = ledger.get_statistics()
    col1, col2, col3 = st.columns(3)
    col1.metric("Dependencies fetched", stats["dependencies"])
    col2.metric("Files", stats["files"])
    col3.metric("Downloaded", format_size(stats["bytes"]))

    st.subheader("Recent fetches")
    history = pd.DataFrame([as_dict(r) for r in ledger.get_recent_fetches()])
    st.dataframe(history, use_container_width=True)


if __name__ == "__main__":
    main()
