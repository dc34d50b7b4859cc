import json
import os
import zlib

import numpy as np
import pytest

from fsakit import (
    InputError,
    IntegrityError,
    OocConfig,
    ResourceError,
    determinize,
    minimize_forward,
    ooc_determinize,
    ooc_minimize,
    ooc_stats,
)
from fsakit.generators import ends_with_ab, kth_from_end, random_dfa, random_nfa
from fsakit.io import dumps_packed
from fsakit.ooc import DfaOnDisk
from fsakit.ooc.checkpoint import fresh_dir
from fsakit.ooc.records import (
    PAIR,
    SUBSET,
    TRIPLE,
    U64,
    decode_members,
    encode_members,
    verify_file,
)
from fsakit.ooc.storage import BatchBuffer, RunContext, external_sort, partition_of
from oracles import N1_PROFILE


class Crash(Exception):
    pass


def crash_at(step):
    def hook(s):
        if s == step:
            raise Crash(s)
    return hook


# --- spill files -----------------------------------------------------------

def test_members_codec_round_trip(rng):
    for _ in range(200):
        members = tuple(sorted(set(rng.integers(0, 2**40, size=int(rng.integers(0, 30))).tolist())))
        assert tuple(decode_members(len(members), encode_members(members))) == members


@pytest.mark.parametrize("codec,records", [
    (TRIPLE, [(1, 0, 2), (2**63, 7, 0)]),
    (PAIR, [(3, 4), (0, 0)]),
    (U64, [0, 5, 2**64 - 1]),
    (SUBSET, [(0, 2, encode_members((1, 9))), (1, 0, b"")]),
])
def test_spill_round_trip(tmp_path, codec, records):
    ctx = RunContext(tmp_path)
    path = tmp_path / "f"
    assert ctx.write_all(path, codec, records, "t") == len(records)
    assert list(ctx.read(path, codec, "t")) == records
    verify_file(path, codec.kind)


def test_spill_many_blocks(tmp_path):
    ctx = RunContext(tmp_path)
    recs = [(i, i % 5, i * 3) for i in range(5000)]
    ctx.write_all(tmp_path / "big", TRIPLE, recs, "t")
    assert list(ctx.read(tmp_path / "big", TRIPLE, "t")) == recs
    assert ctx.memory.current == 0


def test_spill_detects_corruption(tmp_path):
    ctx = RunContext(tmp_path)
    path = tmp_path / "f"
    ctx.write_all(path, TRIPLE, [(i, 0, i) for i in range(100)], "t")
    data = bytearray(path.read_bytes())
    data[40] ^= 0x01
    path.write_bytes(bytes(data))
    with pytest.raises(IntegrityError):
        list(ctx.read(path, TRIPLE, "t"))
    with pytest.raises(IntegrityError):
        verify_file(path)


def test_spill_detects_truncation_and_kind(tmp_path):
    ctx = RunContext(tmp_path)
    path = tmp_path / "f"
    ctx.write_all(path, PAIR, [(1, 2)] * 10, "t")
    with pytest.raises(IntegrityError):
        list(ctx.read(path, TRIPLE, "t"))
    path.write_bytes(path.read_bytes()[:-5])
    with pytest.raises(IntegrityError):
        list(ctx.read(path, PAIR, "t"))


def test_batch_buffer_threshold_and_routing(tmp_path):
    ctx = RunContext(tmp_path)
    W, threshold = 3, 200
    buf = BatchBuffer(ctx, W, threshold, SUBSET, lambda d, i: tmp_path / f"b{d}.{i}", "t")
    sent = []
    for q in range(500):
        blob = encode_members((q, q + 1))
        rec = (q, 2, blob)
        dest = partition_of(blob, W)
        buf.append(dest, rec)
        sent.append(rec)
        assert max(buf.sizes) <= threshold
    files = buf.close()
    got = []
    for d, paths in enumerate(files):
        for p in paths:
            for rec in ctx.read(p, SUBSET, "t"):
                assert partition_of(rec[2], W) == d
                got.append(rec)
    assert sorted(got) == sorted(sent)
    assert ctx.memory.current == 0


def test_partition_of_is_stable():
    assert partition_of(b"abc", 7) == zlib.crc32(b"abc") % 7


def test_external_sort_bounded(tmp_path, rng):
    ctx = RunContext(tmp_path)
    vals = rng.integers(0, 10**6, size=20000).tolist()
    inputs = []
    for i in range(4):
        p = tmp_path / f"in{i}"
        ctx.write_all(p, U64, vals[i::4], "t")
        inputs.append(p)
    budget = 16 << 10
    out = tmp_path / "sorted"
    n = external_sort(ctx, inputs, out, U64, lambda v: v, budget, "t")
    assert n == len(vals)
    assert list(ctx.read(out, U64, "t")) == sorted(vals)
    assert ctx.memory.peak <= budget + 20 * 4096
    assert not any(p.exists() for p in inputs)


def test_disk_limit_raises(tmp_path):
    ctx = RunContext(tmp_path, limit=1000)
    with pytest.raises(OSError):
        ctx.write_all(tmp_path / "x", U64, range(1000), "t")
    assert not (tmp_path / "x").exists()


# --- configuration -----------------------------------------------------------

def test_config_from_env():
    env = {"AUTOSCALE_WORKERS": "3", "AUTOSCALE_BUFFER_BYTES": "65536", "AUTOSCALE_CHECKPOINT": "off"}
    cfg = OocConfig.from_env(env)
    assert (cfg.workers, cfg.buffer_bytes, cfg.checkpoint) == (3, 65536, False)
    assert OocConfig.from_env(env, workers=5, buffer_bytes=None).workers == 5
    assert cfg.memory_bound == 65536 * 5


@pytest.mark.parametrize("kwargs", [{"workers": 0}, {"buffer_bytes": 1024}])
def test_config_validation(kwargs):
    with pytest.raises(InputError):
        OocConfig(**kwargs)


def test_config_bad_env_bool():
    with pytest.raises(InputError):
        OocConfig.from_env({"AUTOSCALE_CHECKPOINT": "maybe"})


def test_fresh_dir_refuses_foreign_directory(tmp_path):
    (tmp_path / "keep.txt").write_text("mine")
    with pytest.raises(InputError):
        fresh_dir(tmp_path)
    assert (tmp_path / "keep.txt").exists()


# --- determinization -----------------------------------------------------------

def test_ends_with_ab(ooc_cfg, workdir):
    run = ooc_determinize(ends_with_ab(), ooc_cfg, workdir=workdir)
    assert run.read_bytes() == dumps_packed(determinize(ends_with_ab())[0])
    assert run.report.profile == N1_PROFILE
    assert run.num_states == 3


@pytest.mark.parametrize("workers", [1, 2, 3])
@pytest.mark.parametrize("policy", ["drop", "keep"])
def test_determinize_matches_sequential(tmp_path, workers, policy):
    cfg = OocConfig(workers=workers, buffer_bytes=16 << 10)
    for seed in range(12):
        nfa = random_nfa(seed, 9, 3)
        dfa, profile = determinize(nfa, policy)
        run = ooc_determinize(nfa, cfg, policy, workdir=tmp_path / f"r{seed}")
        assert run.read_bytes() == dumps_packed(dfa)
        assert run.report.profile == profile


def test_determinize_max_states(ooc_cfg, workdir):
    with pytest.raises(ResourceError):
        ooc_determinize(kth_from_end(8), ooc_cfg, max_states=50, workdir=workdir)


def test_determinize_memory_within_bound(ooc_cfg, workdir):
    run = ooc_determinize(kth_from_end(11), ooc_cfg, workdir=workdir)
    rep = run.report
    assert run.num_states == 2**11
    assert 0 < rep.peak_memory_bytes <= rep.memory_bound
    assert sum(s["new_states"] for s in rep.supersteps[:-1]) == run.num_states


def test_determinize_crash_resume_every_step(tmp_path):
    nfa = kth_from_end(6)
    cfg = OocConfig(workers=2, buffer_bytes=16 << 10)
    want = ooc_determinize(nfa, cfg, workdir=tmp_path / "ref")
    steps = [s["step"] for s in want.report.supersteps]
    assert steps[-1] == "output"
    for step in steps[:-1]:
        wd = tmp_path / f"crash-{step}"
        with pytest.raises(Crash):
            ooc_determinize(nfa, cfg, workdir=wd, on_superstep=crash_at(step))
        got = ooc_determinize(nfa, cfg, workdir=wd, resume=True)
        assert got.read_bytes() == want.read_bytes(), step
        assert got.report.resumed == 1


def test_resume_rejects_other_input(tmp_path):
    cfg = OocConfig(workers=2, buffer_bytes=16 << 10)
    with pytest.raises(Crash):
        ooc_determinize(kth_from_end(5), cfg, workdir=tmp_path / "r", on_superstep=crash_at(2))
    with pytest.raises(InputError):
        ooc_determinize(kth_from_end(4), cfg, workdir=tmp_path / "r", resume=True)


def test_resume_detects_corrupted_spill(tmp_path):
    cfg = OocConfig(workers=2, buffer_bytes=16 << 10)
    wd = tmp_path / "r"
    with pytest.raises(Crash):
        ooc_determinize(kth_from_end(6), cfg, workdir=wd, on_superstep=crash_at(3))
    victim = max((p for p in (wd / "visited").iterdir()), key=lambda p: p.stat().st_size)
    data = bytearray(victim.read_bytes())
    data[20] ^= 0xFF
    victim.write_bytes(bytes(data))
    with pytest.raises(IntegrityError):
        ooc_determinize(kth_from_end(6), cfg, workdir=wd, resume=True)


def test_disk_full_then_resume(tmp_path):
    nfa = kth_from_end(7)
    wd = tmp_path / "r"
    tight = OocConfig(workers=2, buffer_bytes=16 << 10, disk_limit=6000)
    with pytest.raises(ResourceError) as info:
        ooc_determinize(nfa, tight, workdir=wd)
    assert info.value.manifest and os.path.exists(info.value.manifest)
    assert info.value.exit_code == 3
    roomy = OocConfig(workers=2, buffer_bytes=16 << 10)
    got = ooc_determinize(nfa, roomy, workdir=wd, resume=True)
    assert got.read_bytes() == dumps_packed(determinize(nfa)[0])


def test_checkpoint_off(tmp_path):
    cfg = OocConfig(workers=2, buffer_bytes=16 << 10, checkpoint=False)
    run = ooc_determinize(kth_from_end(4), cfg, workdir=tmp_path / "r")
    assert run.num_states == 16
    assert not (tmp_path / "r" / "manifest.json").exists()
    with pytest.raises(InputError):
        ooc_determinize(kth_from_end(4), cfg, workdir=tmp_path / "s", resume=True)


def test_stats_from_workdir(tmp_path):
    cfg = OocConfig(workers=2, buffer_bytes=16 << 10)
    with pytest.raises(Crash):
        ooc_determinize(kth_from_end(5), cfg, workdir=tmp_path / "r", on_superstep=crash_at(2))
    rep = ooc_stats(tmp_path / "r")
    assert [s["step"] for s in rep.supersteps] == [0, 1, 2]
    assert not rep.complete
    doc = json.loads((tmp_path / "r" / "manifest.json").read_text())
    assert doc["state"]["level"] == 2


def test_rejects_dfa_input(ooc_cfg):
    with pytest.raises(InputError):
        ooc_determinize(random_dfa(0, 3, 2), ooc_cfg)


# --- minimization -----------------------------------------------------------

@pytest.mark.parametrize("workers", [1, 2, 4])
def test_minimize_matches_forward(tmp_path, workers):
    cfg = OocConfig(workers=workers, buffer_bytes=16 << 10)
    rng = np.random.default_rng(5)
    for i in range(10):
        d = random_dfa(rng, int(rng.integers(1, 80)), int(rng.integers(1, 4)), density=0.7)
        want, sweeps = minimize_forward(d, return_sweeps=True)
        got, rep = ooc_minimize(d, cfg, workdir=tmp_path / f"m{i}", return_report=True)
        assert got == want
        assert rep.sweeps == sweeps


def test_minimize_from_disk_and_trim(tmp_path, ooc_cfg):
    d = random_dfa(2, 60, 2, density=0.6)
    on_disk = DfaOnDisk.from_dfa(d, tmp_path / "in.fsad")
    assert ooc_minimize(on_disk, ooc_cfg, workdir=tmp_path / "a") == minimize_forward(d)
    assert ooc_minimize(str(on_disk.path), ooc_cfg, workdir=tmp_path / "b", trim=True) == \
        minimize_forward(d, trim=True)


def test_minimize_crash_resume(tmp_path):
    d = random_dfa(3, 150, 3)
    cfg = OocConfig(workers=2, buffer_bytes=16 << 10)
    want, rep = ooc_minimize(d, cfg, workdir=tmp_path / "ref", return_report=True)
    for step in [s["step"] for s in rep.supersteps if isinstance(s["step"], int)]:
        wd = tmp_path / f"c{step}"
        with pytest.raises(Crash):
            ooc_minimize(d, cfg, workdir=wd, on_superstep=crash_at(step))
        assert ooc_minimize(d, cfg, workdir=wd, resume=True) == want


def test_minimize_working_set_reported(tmp_path, ooc_cfg):
    _, rep = ooc_minimize(random_dfa(9, 300, 2), ooc_cfg, workdir=tmp_path / "r", return_report=True)
    assert rep.peak_memory_bytes <= rep.memory_bound
    assert rep.peak_working_set_bytes > 0
    assert rep.counts == sorted(rep.counts)
