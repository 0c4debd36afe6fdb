"""Domain types, page construction, and configuration validation."""

import pytest

from hiermem.errors import ConfigError, InvalidArgumentError
from hiermem.model import (
    Config,
    DialoguePage,
    FactEntry,
    PersonaStore,
    Segment,
    TraitSchema,
    TraitValue,
    default_trait_schema,
    new_page,
    validate_config,
)


class TestNewPage:
    def test_fresh_page_has_no_chain(self):
        page = new_page("hello", "hi there", 100)
        assert page.query == "hello"
        assert page.response == "hi there"
        assert page.timestamp == 100
        assert page.chain_id is None
        assert page.chain_meta == ""
        assert page.keywords == frozenset()
        assert page.embedding is None

    def test_identical_arguments_get_distinct_ids(self):
        a = new_page("hi", "hello", 100)
        b = new_page("hi", "hello", 100)
        assert a.id != b.id

    def test_caller_supplied_id_wins(self):
        assert new_page("hi", "", 0, page_id=41).id == 41

    def test_empty_query_rejected(self):
        with pytest.raises(InvalidArgumentError):
            new_page("", "hello", 100)

    def test_negative_timestamp_rejected(self):
        with pytest.raises(InvalidArgumentError):
            new_page("hi", "hello", -1)

    def test_text_joins_query_and_response(self):
        assert new_page("a b", "c d", 0).text == "a b c d"
        assert new_page("a b", "", 0).text == "a b"


class TestRoundTrips:
    def test_page(self):
        page = DialoguePage(id=3, query="q", response="r", timestamp=9,
                            chain_id=3, chain_meta="meta",
                            keywords=frozenset({"q", "r"}), embedding=(0.5, 1.25))
        assert DialoguePage.from_dict(page.to_dict()) == page

    def test_page_with_unset_optionals(self):
        page = DialoguePage(id=1, query="q", response="", timestamp=0)
        assert DialoguePage.from_dict(page.to_dict()) == page

    def test_segment(self):
        page = DialoguePage(id=1, query="q", response="r", timestamp=5,
                            chain_id=1, chain_meta="m",
                            keywords=frozenset({"q"}), embedding=(1.0, 0.0))
        segment = Segment(id=7, pages=(page,), summary="s",
                          keywords=frozenset({"q"}), embedding=(0.0, 1.0),
                          n_visit=2, l_interaction=1, last_access=5)
        assert Segment.from_dict(segment.to_dict()) == segment

    def test_persona(self):
        persona = PersonaStore(
            user_profile={"name": "Ada"},
            user_kb=(FactEntry("likes tea", (1.0, 0.0), 3, 50),),
            user_traits={"patience": TraitValue("high", 0.8, 60)},
            agent_profile={"style": "direct"},
            agent_traits=(FactEntry("answers briefly", (0.0, 1.0), 3, 50),),
        )
        assert PersonaStore.from_dict(persona.to_dict()) == persona

    def test_trait_schema(self):
        schema = TraitSchema(categories={"a": ("x", "y"), "b": ("z",)})
        assert TraitSchema.from_dict(schema.to_dict()) == schema
        assert schema.dimensions() == {"x", "y", "z"}


class TestDefaultTraitSchema:
    def test_ninety_dimensions_in_three_categories(self):
        schema = default_trait_schema()
        assert len(schema.categories) == 3
        assert sum(len(d) for d in schema.categories.values()) == 90
        assert len(schema.dimensions()) == 90


class TestConfig:
    def test_defaults_are_the_published_operating_point(self):
        config = Config()
        assert config.stm_capacity == 7
        assert config.mtm_segment_capacity == 200
        assert config.kb_capacity == 100
        assert config.agent_traits_capacity == 100
        assert config.heat_tau == 5.0
        assert (config.alpha, config.beta, config.gamma) == (1.0, 1.0, 1.0)
        assert config.mu == 1e7
        assert config.theta == 0.6
        assert config.top_m_segments == 5
        assert config.top_k_pages == 10
        assert config.lpm_top_n == 10

    def test_empty_mapping_gives_defaults(self):
        assert Config.from_dict({}) == Config()

    def test_partial_mapping_keeps_other_defaults(self):
        config = Config.from_dict({"theta": 0.3, "stm_capacity": 4})
        assert config.theta == 0.3
        assert config.stm_capacity == 4
        assert config.mu == 1e7

    def test_unknown_key_is_named(self):
        with pytest.raises(ConfigError) as err:
            Config.from_dict({"stm_cap": 3})
        assert err.value.field == "stm_cap"

    def test_zero_capacity_is_named(self):
        with pytest.raises(ConfigError) as err:
            validate_config(Config(stm_capacity=0))
        assert err.value.field == "stm_capacity"

    @pytest.mark.parametrize("theta", [-1.0, 0.0, 0.3, 2.0])
    def test_theta_range_accepted(self, theta):
        assert validate_config(Config(theta=theta)).theta == theta

    @pytest.mark.parametrize("theta", [-1.1, 2.0001])
    def test_theta_out_of_range_rejected(self, theta):
        with pytest.raises(ConfigError) as err:
            validate_config(Config(theta=theta))
        assert err.value.field == "theta"

    def test_negative_weight_rejected(self):
        with pytest.raises(ConfigError):
            validate_config(Config(beta=-0.5))

    def test_mu_must_be_positive(self):
        with pytest.raises(ConfigError) as err:
            validate_config(Config(mu=0))
        assert err.value.field == "mu"

    def test_validation_is_idempotent(self):
        config = Config(theta=1.5, stm_capacity=3)
        assert validate_config(validate_config(config)) == config

    def test_duplicate_trait_dimensions_rejected(self):
        schema = TraitSchema(categories={"a": ("x",), "b": ("x",)})
        with pytest.raises(ConfigError) as err:
            validate_config(Config(trait_schema=schema))
        assert err.value.field == "trait_schema"

    def test_config_round_trip(self):
        config = Config(theta=0.8, top_k_pages=3)
        assert Config.from_dict(config.to_dict()) == config
