import pytest

from infodig.simenv import build_db, serve, site_spec


@pytest.fixture(scope="session")
def flights_db():
    return build_db("flights", 7, 60)


@pytest.fixture(scope="session")
def shopping_db():
    return build_db("shopping", 7, 60)


@pytest.fixture(scope="session")
def statistics_db():
    return build_db("statistics", 7, 80)


def _server(spec_kind, tier, db):
    handle = serve(site_spec(spec_kind, tier), db, 0)
    yield handle
    handle.stop()


@pytest.fixture(scope="session")
def flights_server(flights_db):
    yield from _server("flights", "form", flights_db)


@pytest.fixture(scope="session")
def shopping_server(shopping_db):
    yield from _server("shopping", "form", shopping_db)


@pytest.fixture(scope="session")
def statistics_server(statistics_db):
    yield from _server("statistics", "form", statistics_db)
