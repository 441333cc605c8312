from collections import Counter

import pytest

from application.services.sampler_service import SamplerService, derive_pairs
from domain.entities.stylizer import StylizerKind
from domain.exceptions import InvalidArgumentError, InvariantViolationError

ALL_KINDS = list(StylizerKind)


@pytest.fixture
def pools(datagen_service):
    contents = datagen_service.content_pool(range(10), 16)
    styles = datagen_service.style_pool(range(6), 16)
    return contents, styles


def test_six_items_use_three_styles_twice(sampler_service, pools):
    plan = sampler_service.build_batch(*pools, 6, ALL_KINDS, rng_seed=3)
    assert plan.size == 6
    assert sorted(Counter(plan.labels).values()) == [2, 2, 2]
    assert sorted(plan.style_sources) == sorted(set(plan.labels))


def test_contents_are_distinct_within_a_batch(sampler_service, pools):
    plan = sampler_service.build_batch(*pools, 8, ALL_KINDS, rng_seed=5)
    assert len({item.content_id for item in plan.items}) == 8


def test_odd_batch_is_rejected(sampler_service, pools):
    with pytest.raises(InvalidArgumentError):
        sampler_service.build_batch(*pools, 5, ALL_KINDS, rng_seed=0)


def test_small_pools_are_rejected(sampler_service, pools):
    contents, styles = pools
    with pytest.raises(InvalidArgumentError):
        sampler_service.build_batch(contents, styles, 12, ALL_KINDS, rng_seed=0)
    with pytest.raises(InvalidArgumentError):
        sampler_service.build_batch(contents, {0: styles[0]}, 4, ALL_KINDS, rng_seed=0)


def test_no_enabled_kinds_is_rejected(sampler_service, pools):
    with pytest.raises(InvalidArgumentError):
        sampler_service.build_batch(*pools, 4, [], rng_seed=0)


def test_same_seed_gives_the_same_plan(sampler_service, pools):
    a = sampler_service.build_batch(*pools, 6, ALL_KINDS, rng_seed=9)
    b = sampler_service.build_batch(*pools, 6, ALL_KINDS, rng_seed=9)
    assert [(i.content_id, i.style_id, i.kind) for i in a.items] == [
        (i.content_id, i.style_id, i.kind) for i in b.items
    ]
    assert all(x.image.same_pixels(y.image) for x, y in zip(a.items, b.items))


def test_only_enabled_kinds_are_drawn(sampler_service, pools):
    plan = sampler_service.build_batch(*pools, 8, [StylizerKind.PATCH_BLEND], rng_seed=1)
    assert {item.kind for item in plan.items} == {StylizerKind.PATCH_BLEND}


def test_parallel_stylization_gives_the_same_plan(stylizer_service, pools):
    serial = SamplerService(stylizer_service, workers=1).build_batch(*pools, 8, ALL_KINDS, 4)
    parallel = SamplerService(stylizer_service, workers=4).build_batch(*pools, 8, ALL_KINDS, 4)
    assert all(a.image.same_pixels(b.image) for a, b in zip(serial.items, parallel.items))


def test_items_are_stylized_from_their_sources(sampler_service, stylizer_service, pools):
    contents, styles = pools
    plan = sampler_service.build_batch(contents, styles, 4, ALL_KINDS, rng_seed=2)
    for item in plan.items:
        expected = stylizer_service.stylize(item.kind, contents[item.content_id], styles[item.style_id])
        assert item.image.same_pixels(expected)


def test_derive_pairs_by_definition():
    pairs = derive_pairs([10, 10, 11, 11])
    assert (pairs[0].positive, set(pairs[0].negatives)) == (1, {2, 3})
    assert (pairs[3].positive, set(pairs[3].negatives)) == (2, {0, 1})


def test_pairing_is_an_involution(sampler_service, pools):
    plan = sampler_service.build_batch(*pools, 8, ALL_KINDS, rng_seed=7)
    pairs = SamplerService.derive_pairs(plan)
    for pair in pairs:
        assert pairs[pair.positive].positive == pair.anchor
        assert len(pair.negatives) == 6


def test_malformed_labels_violate_the_pairing_invariant():
    with pytest.raises(InvariantViolationError):
        derive_pairs([0, 0, 0, 1])
