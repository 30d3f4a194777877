import os
import random

import pytest

from datadep.errors import NoWritableStoreError
from datadep.locate import (
    LoadPath,
    LoadPathEntry,
    Origin,
    Platform,
    SatisfiedBy,
    build_load_path,
    planned_store_dir,
    search,
    store_dir,
    with_store,
)


def entries(load_path):
    return [(e.directory, e.origin) for e in load_path]


class TestBuildLoadPath:
    def test_env_entries_come_first(self):
        load_path = build_load_path(
            {"DATADEP_LOAD_PATH": "/a:/b", "HOME": "/h"}, Platform.POSIX, "/w"
        )
        assert entries(load_path)[:3] == [
            ("/a", Origin.ENV),
            ("/b", Origin.ENV),
            ("/w/datadeps", Origin.WORKING_DIR),
        ]

    def test_defaults(self):
        load_path = build_load_path({"HOME": "/h"}, Platform.POSIX, "/w")
        assert entries(load_path) == [
            ("/w/datadeps", Origin.WORKING_DIR),
            ("/h/.local/share/datadeps", Origin.USER_STORE),
            ("/usr/share/datadeps", Origin.SYSTEM_STORE),
        ]

    def test_relative_entries_resolve_against_working_dir(self):
        load_path = build_load_path({"DATADEP_LOAD_PATH": "rel"}, Platform.POSIX, "/w")
        assert entries(load_path)[0] == ("/w/rel", Origin.ENV)

    def test_empty_segments_are_dropped(self):
        load_path = build_load_path({"DATADEP_LOAD_PATH": ":/a::"}, Platform.POSIX, "/w")
        assert load_path.directories(Origin.ENV) == ["/a"]

    def test_xdg_data_home_wins_over_home(self):
        load_path = build_load_path(
            {"HOME": "/h", "XDG_DATA_HOME": "/xdg"}, Platform.POSIX, "/w"
        )
        assert load_path.directories(Origin.USER_STORE) == ["/xdg/datadeps"]

    def test_relative_xdg_data_home_is_ignored(self):
        load_path = build_load_path(
            {"HOME": "/h", "XDG_DATA_HOME": "xdg"}, Platform.POSIX, "/w"
        )
        assert load_path.directories(Origin.USER_STORE) == ["/h/.local/share/datadeps"]

    def test_no_home_omits_user_store(self):
        load_path = build_load_path({}, Platform.POSIX, "/w")
        assert load_path.directories(Origin.USER_STORE) == []

    def test_windows_conventions(self):
        load_path = build_load_path(
            {
                "DATADEP_LOAD_PATH": "D:\\data;rel",
                "LOCALAPPDATA": "C:\\Users\\u\\AppData\\Local",
                "PROGRAMDATA": "C:\\ProgramData",
            },
            Platform.WINDOWS,
            "C:\\w",
        )
        assert entries(load_path) == [
            ("D:\\data", Origin.ENV),
            ("C:\\w\\rel", Origin.ENV),
            ("C:\\w\\datadeps", Origin.WORKING_DIR),
            ("C:\\Users\\u\\AppData\\Local\\datadeps", Origin.USER_STORE),
            ("C:\\ProgramData\\datadeps", Origin.SYSTEM_STORE),
        ]

    def test_relative_working_dir_is_rejected(self):
        with pytest.raises(ValueError):
            build_load_path({}, Platform.POSIX, "w")

    def test_is_pure(self):
        env = {"DATADEP_LOAD_PATH": "/a:rel", "HOME": "/h"}
        first = build_load_path(env, Platform.POSIX, "/w")
        assert first == build_load_path(dict(env), Platform.POSIX, "/w")
        assert all(os.path.isabs(d) for d in first.directories())


def populate(directory, name):
    path = directory / name
    path.mkdir(parents=True, exist_ok=True)
    (path / "data.csv").write_text("1,2,3\n")
    return path


class TestSearch:
    def make_load_path(self, tmp_path, count=3):
        dirs = [tmp_path / f"entry{i}" for i in range(count)]
        for d in dirs:
            d.mkdir()
        load_path = LoadPath(tuple(LoadPathEntry(str(d), Origin.ENV) for d in dirs))
        return dirs, load_path

    def test_first_entry_wins(self, tmp_path):
        dirs, load_path = self.make_load_path(tmp_path)
        populate(dirs[0], "D")
        populate(dirs[2], "D")
        found = search(load_path, "D")
        assert found.path == str(dirs[0] / "D")
        assert found.satisfied_by is SatisfiedBy.FOUND_LOCAL

    def test_absent_everywhere(self, tmp_path):
        _, load_path = self.make_load_path(tmp_path)
        assert search(load_path, "D") is None

    def test_empty_directory_does_not_count(self, tmp_path):
        dirs, load_path = self.make_load_path(tmp_path)
        (dirs[0] / "D").mkdir()
        assert search(load_path, "D") is None

    def test_regular_file_does_not_count(self, tmp_path):
        dirs, load_path = self.make_load_path(tmp_path)
        (dirs[0] / "D").write_text("not a directory")
        assert search(load_path, "D") is None

    @pytest.mark.skipif(os.name != "posix" or os.geteuid() == 0, reason="needs POSIX permissions")
    def test_unreadable_entry_is_skipped(self, tmp_path):
        dirs, load_path = self.make_load_path(tmp_path)
        locked = populate(dirs[0], "D")
        populate(dirs[1], "D")
        locked.chmod(0)
        try:
            assert search(load_path, "D").path == str(dirs[1] / "D")
        finally:
            locked.chmod(0o755)

    def test_does_not_write(self, tmp_path):
        dirs, load_path = self.make_load_path(tmp_path)
        populate(dirs[1], "D")
        before = sorted(str(p) for p in tmp_path.rglob("*"))
        search(load_path, "D")
        search(load_path, "missing")
        assert sorted(str(p) for p in tmp_path.rglob("*")) == before

    def test_precedence_property(self, tmp_path):
        rng = random.Random(2024)
        for case in range(200):
            root = tmp_path / f"case{case}"
            dirs = [root / f"e{i}" for i in range(rng.randint(1, 6))]
            for d in dirs:
                d.mkdir(parents=True)
            holders = [i for i in range(len(dirs)) if rng.random() < 0.4]
            for i in range(len(dirs)):
                if i in holders:
                    populate(dirs[i], "D")
                elif rng.random() < 0.3:
                    (dirs[i] / "D").mkdir()
            load_path = LoadPath(tuple(LoadPathEntry(str(d), Origin.ENV) for d in dirs))

            found = search(load_path, "D")
            if holders:
                assert found.path == str(dirs[holders[0]] / "D")
            else:
                assert found is None

            extra = root / "prepended"
            populate(extra, "D")
            assert search(load_path.prepend(str(extra)), "D").path == str(extra / "D")


class TestStoreDir:
    def test_env_store_is_created(self, tmp_path):
        target = tmp_path / "data" / "dd"
        load_path = build_load_path({}, Platform.POSIX, str(tmp_path))
        assert store_dir(load_path, {"DATADEP_STORE": str(target)}) == str(target)
        assert target.is_dir()

    def test_defaults_to_user_store(self, tmp_path):
        env = {"HOME": str(tmp_path / "h")}
        load_path = build_load_path(env, Platform.POSIX, str(tmp_path))
        expected = tmp_path / "h" / ".local" / "share" / "datadeps"
        assert store_dir(load_path, env) == str(expected)
        assert expected.is_dir()

    def test_no_writable_candidate(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        load_path = LoadPath(
            (LoadPathEntry(str(blocker / "system"), Origin.SYSTEM_STORE),)
        )
        with pytest.raises(NoWritableStoreError) as excinfo:
            store_dir(load_path, {})
        assert [path for path, _ in excinfo.value.attempts] == [str(blocker / "system")]

    def test_nothing_to_try(self):
        with pytest.raises(NoWritableStoreError):
            store_dir(LoadPath(()), {})

    def test_planned_store_dir_does_not_create(self, tmp_path):
        env = {"HOME": str(tmp_path / "h")}
        load_path = build_load_path(env, Platform.POSIX, str(tmp_path))
        planned = planned_store_dir(load_path, env)
        assert planned == str(tmp_path / "h" / ".local" / "share" / "datadeps")
        assert not (tmp_path / "h").exists()


class TestWithStore:
    def test_appends_store_once(self, tmp_path):
        env = {"DATADEP_STORE": str(tmp_path / "store")}
        load_path = build_load_path({}, Platform.POSIX, str(tmp_path))
        extended = with_store(load_path, env)
        assert extended.entries[-1] == LoadPathEntry(str(tmp_path / "store"), Origin.ENV)
        assert with_store(extended, env) == extended

    def test_no_store_env_is_noop(self, tmp_path):
        load_path = build_load_path({}, Platform.POSIX, str(tmp_path))
        assert with_store(load_path, {}) is load_path
