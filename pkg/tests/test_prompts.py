import pytest
from hypothesis import given, settings, strategies as st

from maxcode.agents.prompts import (
    ATTEMPT_MARK,
    BEST_MARK,
    CRITIQUE_MARK,
    USER_SEPARATOR,
    PromptContext,
    PromptContextError,
    PromptVariant,
    load_template,
    prompt_hash,
    render_critic_prompt,
    render_generator_prompt,
    render_reward_prompt,
    split_prompt,
)
from maxcode.core import CRITIC_VARIANTS, GENERATOR_VARIANTS, PIE_BINS, Critique, ExecFeedback, IOPair, ProblemSpec, SearchState

PROBLEM = ProblemSpec("p", "Make it fast.", "int main(){}", (IOPair("", ""),), PIE_BINS, baseline_time_ms=12.5)


def chain(n, with_critique=True, feedback=None):
    states = [SearchState("n0", None, "p", 0, "int main(){}")]
    for i in range(1, n + 1):
        fb = feedback or ExecFeedback(True, True, "ok", 10.0, 1.0 + i / 10)
        crit = Critique(f"critique {i}", "TrajCritique") if with_critique else None
        states.append(SearchState(f"n{i}", f"n{i-1}", "p", i, f"code {i}", fb, crit, u_raw=1.0 + i / 10, order=i))
    return states


def ctx_for(states, best=True):
    return PromptContext(PROBLEM, states[-1], tuple(states), states[-1] if best else None, states[-1].u_raw)


def count(prompt, mark):
    return prompt.count(mark)


def test_variant_flags_follow_names():
    v = PromptVariant.named("TrajCritiqueBestPerf")
    assert v.uses_trajectory and v.uses_best_perf and v.uses_critique
    b = PromptVariant.named("Base")
    assert not (b.uses_trajectory or b.uses_best_perf or b.uses_critique)
    assert PromptVariant.named("BestPerf").critic_variant is None
    assert PromptVariant.named("Critique").critic_variant == "Critique"
    with pytest.raises(ValueError):
        PromptVariant.named("Nope")
    with pytest.raises(ValueError):
        PromptVariant("Base", True, False, False)


def test_every_template_ships_with_placeholders():
    for directory in (None, "pie"):
        for name in GENERATOR_VARIANTS:
            system, user = load_template(f"generator_{name}.txt", directory)
            assert system and "{problem}" in user and "{attempt}" in user
        for name in CRITIC_VARIANTS:
            _, user = load_template(f"critic_{name}.txt", directory)
            assert "{focus}" in user
        system, user = load_template("reward.txt", directory)
        assert "{s1}" in system and "{remaining_rounds}" in user


def test_base_depth_one_has_one_attempt_no_critique():
    p = render_generator_prompt(PromptVariant.named("Base"), ctx_for(chain(1, False), best=False))
    assert count(p, ATTEMPT_MARK) == 1
    assert count(p, CRITIQUE_MARK) == 0 and count(p, BEST_MARK) == 0


def test_full_variant_marker_counts():
    p = render_generator_prompt(PromptVariant.named("TrajCritiqueBestPerf"), ctx_for(chain(3)))
    assert count(p, ATTEMPT_MARK) == 3
    assert count(p, CRITIQUE_MARK) == 3
    assert count(p, BEST_MARK) == 1


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(GENERATOR_VARIANTS), st.integers(1, 6))
def test_marker_counts_for_every_variant(name, n):
    v = PromptVariant.named(name)
    p = render_generator_prompt(v, ctx_for(chain(n)))
    assert count(p, ATTEMPT_MARK) == (n if v.uses_trajectory else 1)
    assert count(p, CRITIQUE_MARK) == ((n if v.uses_trajectory else 1) if v.uses_critique else 0)
    assert count(p, BEST_MARK) == int(v.uses_best_perf)
    assert p == render_generator_prompt(v, ctx_for(chain(n)))


def test_section_order():
    p = render_generator_prompt(PromptVariant.named("TrajCritiqueBestPerf"), ctx_for(chain(2)))
    _, user = split_prompt(p)
    positions = [user.index(m) for m in ("## Problem", BEST_MARK, "## Trajectory", "Latest attempt", f"{CRITIQUE_MARK} 2]")]
    assert positions == sorted(positions)


def test_traj_on_root_is_degenerate():
    root = chain(0)
    p = render_generator_prompt(PromptVariant.named("Traj"), ctx_for(root, best=False))
    assert "(no previous attempts)" in p and count(p, ATTEMPT_MARK) == 0


def test_missing_fields_are_named():
    with pytest.raises(PromptContextError, match="best_node"):
        render_generator_prompt(PromptVariant.named("BestPerf"), ctx_for(chain(1), best=False))
    with pytest.raises(PromptContextError, match="critique"):
        render_generator_prompt(PromptVariant.named("Critique"), ctx_for(chain(1, False)))


def test_context_must_be_a_path():
    states = chain(2)
    with pytest.raises(PromptContextError):
        PromptContext(PROBLEM, states[1], tuple(states))
    with pytest.raises(PromptContextError):
        PromptContext(PROBLEM, states[2], tuple(states[1:]))
    # skipping an intermediate state is allowed
    PromptContext(PROBLEM, states[2], (states[0], states[2]))


def test_critic_focus_follows_feedback():
    compile_fail = chain(1, False, ExecFeedback(False, False, "error: x"))
    p = render_critic_prompt("Critique", ctx_for(compile_fail, best=False))
    assert "fails to compile" in p
    fast = chain(1, False)
    p = render_critic_prompt("CritiqueBestPerf", ctx_for(fast))
    assert "bottleneck of running time" in p
    wrong = chain(1, False, ExecFeedback(True, False, "test 1: wrong answer", 0.0, 0.0))
    assert "incorrect" in render_critic_prompt("TrajCritique", ctx_for(wrong, best=False))


def test_critic_preconditions():
    with pytest.raises(PromptContextError):
        render_critic_prompt("Base", ctx_for(chain(1)))
    with pytest.raises(PromptContextError):
        render_critic_prompt("Critique", ctx_for(chain(0)))


def test_reward_prompt_layout():
    hist = chain(2)[1:]
    p = render_reward_prompt(PROBLEM, hist, "new code", 5)
    assert "125%" in p and "260%" in p
    assert count(p, ATTEMPT_MARK) == 3
    assert "5" in split_prompt(p)[1]
    # the newest attempt has no feedback
    tail = p.split(f"{ATTEMPT_MARK} 3]")[1]
    assert "Execution feedback" not in tail


def test_prompt_split_and_hash():
    p = render_generator_prompt(PromptVariant.named("Base"), ctx_for(chain(1, False), best=False))
    system, user = split_prompt(p)
    assert USER_SEPARATOR not in system and USER_SEPARATOR not in user
    assert len(prompt_hash(p)) == 16 and prompt_hash(p) == prompt_hash(p)


def test_custom_template_dir(tmp_path):
    (tmp_path / "generator_Base.txt").write_text(f"SYS\n{USER_SEPARATOR}\nP={{problem}} A={{attempt}}\n")
    p = render_generator_prompt(PromptVariant.named("Base"), ctx_for(chain(1, False), best=False), str(tmp_path))
    assert p.startswith("SYS\n") and "P=## Problem" in p
