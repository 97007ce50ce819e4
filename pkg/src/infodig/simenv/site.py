"""Page layouts for the simulated websites.

Every site has the same shape guarantee: the homepage and all depth-1 pages
(forms, listings, about pages) never show answer values; answers appear only
on result/detail pages at depth >= 2, reached through forms or links.  Form
tier pages work with client scripting disabled; widget tier pages render
anchors that the separate widget bundle hydrates, with a no-script
placeholder and no data in the HTML itself.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from urllib.parse import urlencode
from xml.sax.saxutils import escape, quoteattr

from ..errors import ProtocolError
from . import files
from .db import SimDatabase

TIERS = ("form", "widget")

_SITE_TITLES = {
    "flights": "SimFlights",
    "shopping": "SimShop Records",
    "statistics": "SimStats Portal",
}
_SITE_DESCRIPTIONS = {
    "flights": "Timetables and fares for the fictional SimFlights network.",
    "shopping": "Order history explorer for the fictional SimShop storefront.",
    "statistics": "Regional statistics lookup for a fictional territory.",
}


@dataclass(frozen=True)
class SimSiteSpec:
    kind: str
    tier: str
    min_depth_to_answer: int = 2
    interactive_elements: tuple[str, ...] = ()

    def __post_init__(self):
        if self.tier not in TIERS:
            raise ProtocolError(f"unknown tier: {self.tier!r}")


def site_spec(kind: str, tier: str = "form") -> SimSiteSpec:
    widgets = {
        "flights": ("date selectors", "filters"),
        "shopping": ("radio buttons", "date selectors", "filters"),
        "statistics": ("radio buttons", "filters", "graphs"),
    }
    if kind not in widgets:
        raise ProtocolError(f"unknown site kind: {kind!r}")
    return SimSiteSpec(kind=kind, tier=tier, interactive_elements=widgets[kind] if tier == "widget" else ())


def _page(title: str, desc: str, body: str, extra_head: str = "") -> str:
    return (
        "<!DOCTYPE html>\n<html><head>"
        f"<title>{escape(title)}</title>"
        f"<meta name=\"description\" content={quoteattr(desc)}>"
        f"{extra_head}</head><body>"
        f"<header><h1>{escape(title)}</h1><nav><a href=\"/\">Home</a></nav></header>"
        f"{body}"
        "<footer><p>A simulated website for agent evaluation.</p></footer>"
        "</body></html>"
    )


def _options(values, any_label: str = "") -> str:
    out = []
    if any_label:
        out.append(f'<option value="">{escape(any_label)}</option>')
    out.extend(f"<option value={quoteattr(str(v))}>{escape(str(v))}</option>" for v in values)
    return "".join(out)


_NOSCRIPT = (
    "<noscript><p>This page needs client-side scripting. "
    "Enable scripts to load live data.</p></noscript>"
)


class SiteRenderer:
    """Pure function of (spec, db): renders every path deterministically."""

    def __init__(self, spec: SimSiteSpec, db: SimDatabase, widget_bundle: bytes = b""):
        if spec.kind != db.kind:
            raise ProtocolError(f"spec kind {spec.kind!r} does not match db kind {db.kind!r}")
        self.spec = spec
        self.db = db
        self.widget_bundle = widget_bundle
        self.title = _SITE_TITLES[spec.kind]
        self.description = _SITE_DESCRIPTIONS[spec.kind]

    # -- page graph ---------------------------------------------------------

    def static_pages(self) -> dict[str, int]:
        """Static GET paths and their link depth from the homepage."""
        pages = {"/": 0, "/about": 1}
        if self.spec.kind == "flights":
            pages["/search"] = 1
        elif self.spec.kind == "shopping":
            pages["/orders"] = 1
        else:
            pages["/stats"] = 1
            pages["/reports"] = 1
            if self.spec.tier == "widget":
                pages["/chart"] = 1
        return pages

    def pages_below_answer_depth(self) -> list[str]:
        return [p for p, d in self.static_pages().items() if d < self.spec.min_depth_to_answer]

    def index_entries(self) -> list[tuple[str, str, str]]:
        """(path, title, snippet) for the pages a search engine would have
        indexed: the homepage and its directly linked static pages."""
        titles = {
            "/": self.title,
            "/about": f"About {self.title}",
            "/search": f"{self.title} search",
            "/orders": f"{self.title} lookup",
            "/stats": f"{self.title} lookup",
            "/reports": f"{self.title} reports",
            "/chart": f"{self.title} chart",
        }
        snippets = {
            "/": self.description,
            "/about": "What this simulated site is for and how it is generated.",
            "/search": "Search fictional flights by route and travel date.",
            "/orders": "Filter fictional orders by customer, item, and date.",
            "/stats": "Look up published indicator values by region and period.",
            "/reports": "Download audited report files; audited figures live only in these files.",
            "/chart": "Metric chart by region, drawn client-side.",
        }
        return [
            (path, titles.get(path, self.title), snippets.get(path, self.description))
            for path, depth in self.static_pages().items()
            if depth <= 1
        ]

    def download_names(self) -> list[str]:
        if self.spec.kind != "statistics":
            return []
        regions = sorted({r["region"] for r in self.db.records})
        metrics = sorted({r["metric"] for r in self.db.records})
        names = [f"audited-{files._slug(r)}.pdf" for r in regions]
        names += [f"data-{files._slug(m)}.xlsx" for m in metrics]
        return names

    # -- request handling -----------------------------------------------------

    def handle(self, method: str, path: str, query: dict[str, str], form: dict[str, str]):
        """Returns (status, content_type, body_bytes, location)."""
        if method == "POST":
            # post/redirect/get so results live at stable URLs
            target = {"/results": "/results", "/orders/results": "/orders/results", "/stats/results": "/stats/results"}.get(path)
            if target is None:
                return 404, "text/plain; charset=utf-8", b"no such form endpoint", None
            qs = urlencode(sorted((k, v) for k, v in form.items() if v != ""))
            return 303, "text/plain; charset=utf-8", b"", f"{target}?{qs}" if qs else target
        if path.startswith("/go/"):
            return 302, "text/plain; charset=utf-8", b"", "/" + path[len("/go/"):]
        if path.startswith("/download/"):
            return self._download(path[len("/download/"):])
        if path == "/api/rows":
            if self.spec.tier != "widget":
                return 404, "text/plain; charset=utf-8", b"not available on this tier", None
            rows = [r for r in self.db.records if all(str(r.get(k)) == v for k, v in query.items())]
            body = json.dumps({"rows": rows}, ensure_ascii=False, sort_keys=True).encode("utf-8")
            return 200, "application/json; charset=utf-8", body, None
        if path == "/static/widgets.js":
            if self.spec.tier != "widget" or not self.widget_bundle:
                return 404, "text/plain; charset=utf-8", b"no widget bundle", None
            return 200, "application/javascript; charset=utf-8", self.widget_bundle, None
        html = self._render_page(path, query)
        if html is None:
            return 404, "text/html; charset=utf-8", _page("Not found", "missing page", "<p>No such page.</p>").encode("utf-8"), None
        return 200, "text/html; charset=utf-8", html.encode("utf-8"), None

    def _download(self, name: str):
        if self.spec.kind != "statistics" or name not in self.download_names():
            return 404, "text/plain; charset=utf-8", b"no such file", None
        if name.endswith(".pdf"):
            region = next(r for r in sorted({x["region"] for x in self.db.records}) if f"audited-{files._slug(r)}.pdf" == name)
            return 200, "application/pdf", files.region_report_pdf(self.db, region), None
        metric = next(m for m in sorted({x["metric"] for x in self.db.records}) if f"data-{files._slug(m)}.xlsx" == name)
        body = files.metric_workbook_xlsx(self.db, metric)
        return 200, "application/vnd.openxmlformats-officedocument.spreadsheetml.sheet", body, None

    # -- html pages -----------------------------------------------------------

    def _render_page(self, path: str, query: dict[str, str]):
        kind = self.spec.kind
        if path == "/":
            return self._home()
        if path == "/about":
            return _page(
                f"About {self.title}",
                self.description,
                "<p>This site exists so information-seeking agents can practice "
                "navigating forms, filters and downloads against known data. "
                "Nothing here refers to real places, people, or prices.</p>",
            )
        if kind == "flights":
            if path == "/search":
                return self._flights_search()
            if path == "/results":
                return self._flights_results(query)
            if path.startswith("/flight/"):
                return self._flight_detail(path[len("/flight/"):])
        elif kind == "shopping":
            if path == "/orders":
                return self._orders_form()
            if path == "/orders/results":
                return self._orders_results(query)
            if path.startswith("/order/"):
                return self._order_detail(path[len("/order/"):])
        else:
            if path == "/stats":
                return self._stats_form()
            if path == "/stats/results":
                return self._stats_results(query)
            if path == "/reports":
                return self._reports()
            if path == "/chart" and self.spec.tier == "widget":
                return self._chart(query)
        return None

    def _home(self) -> str:
        links = {
            "flights": [("/search", "Flight search"), ("/about", "About")],
            "shopping": [("/orders", "Order lookup"), ("/about", "About")],
            "statistics": [("/stats", "Statistics lookup"), ("/reports", "Audited reports"), ("/about", "About")],
        }[self.spec.kind]
        intro = {
            "flights": "Plan journeys across the SimFlights network. Use the flight search to "
                       "compare fares between cities on your travel date.",
            "shopping": "Browse the SimShop order ledger. Use the order lookup to filter "
                        "purchases by customer, item, and date.",
            "statistics": "Explore regional indicators for a fictional territory. Use the lookup "
                          "for published figures, or fetch audited report files for audited ones.",
        }[self.spec.kind]
        body = f"<p>{escape(intro)}</p><ul>" + "".join(
            f'<li><a href="{href}">{escape(label)}</a></li>' for href, label in links
        ) + "</ul>"
        return _page(self.title, self.description, body)

    def _widget_head(self) -> str:
        return '<script src="/static/widgets.js" defer></script>' if self.spec.tier == "widget" else ""

    def _flights_search(self) -> str:
        origins = sorted({r["origin"] for r in self.db.records})
        dests = sorted({r["destination"] for r in self.db.records})
        if self.spec.tier == "widget":
            body = (
                "<h2>Search flights</h2>" + _NOSCRIPT +
                '<div data-widget="date_picker" data-endpoint="/api/rows" data-param="date" '
                'data-target="flight-results" id="flight-date-picker"></div>'
                '<div data-widget="radio_filter" data-field="origin" data-target="flight-results" '
                f'data-choices={quoteattr(json.dumps(origins))} id="flight-origin-filter"></div>'
                '<div id="flight-results" data-result-region="true"></div>'
            )
            return _page(f"{self.title} search", "Pick a travel date to list flights.", body, self._widget_head())
        body = (
            "<h2>Search flights</h2>"
            '<form action="/results" method="post">'
            f'<label>From <select name="origin">{_options(origins)}</select></label>'
            f'<label>To <select name="destination">{_options(dests)}</select></label>'
            '<label>Date <input type="date" name="date" value=""></label>'
            '<label>Sort <select name="sort">'
            '<option value="fare_asc">price (low to high)</option>'
            '<option value="fare_desc">price (high to low)</option>'
            "</select></label>"
            '<button type="submit">Search flights</button>'
            "</form>"
        )
        return _page(f"{self.title} search", "Search fictional flights by route and date.", body)

    def _flights_results(self, query: dict[str, str]) -> str:
        rows = [
            r for r in self.db.records
            if (not query.get("origin") or r["origin"] == query["origin"])
            and (not query.get("destination") or r["destination"] == query["destination"])
            and (not query.get("date") or r["date"] == query["date"])
        ]
        reverse = query.get("sort") == "fare_desc"
        rows.sort(key=lambda r: (r["fare"], r["flight_no"]), reverse=reverse)
        items = "".join(
            f'<li>{escape(r["airline"])} flight <a href="/flight/{r["flight_no"]}">{r["flight_no"]}</a> '
            f'on {r["date"]} departs {r["depart_time"]} fare {r["fare"]:.2f}</li>'
            for r in rows
        )
        body = f"<h2>Flight results</h2><p>{len(rows)} flights found.</p><ol>{items}</ol>"
        return _page(f"{self.title} results", "Matching flights.", body)

    def _flight_detail(self, flight_no: str):
        match = [r for r in self.db.records if r["flight_no"] == flight_no]
        if not match:
            return None
        r = match[0]
        body = (
            f"<h2>Flight {escape(r['flight_no'])}</h2>"
            f"<p>{escape(r['airline'])} from {escape(r['origin'])} to {escape(r['destination'])} "
            f"on {r['date']}, departing {r['depart_time']}.</p>"
            f"<p>Fare: {r['fare']:.2f}</p>"
        )
        return _page(f"Flight {r['flight_no']}", "Flight detail.", body)

    def _orders_form(self) -> str:
        users = sorted({r["user"] for r in self.db.records})
        items = sorted({r["item"] for r in self.db.records})
        if self.spec.tier == "widget":
            body = (
                "<h2>Order lookup</h2>" + _NOSCRIPT +
                '<div data-widget="radio_filter" data-field="user" data-target="order-results" '
                f'data-choices={quoteattr(json.dumps(users))} id="order-user-filter"></div>'
                '<div data-widget="date_picker" data-endpoint="/api/rows" data-param="date" '
                'data-target="order-results" id="order-date-picker"></div>'
                '<div id="order-results" data-result-region="true"></div>'
            )
            return _page(f"{self.title} lookup", "Filter orders interactively.", body, self._widget_head())
        body = (
            "<h2>Order lookup</h2>"
            '<form action="/orders/results" method="post">'
            "<fieldset><legend>Customer</legend>"
            + "".join(
                f'<label><input type="radio" name="user" value={quoteattr(u)}> {escape(u)}</label>'
                for u in users
            )
            + "</fieldset>"
            f'<label>Item <select name="item">{_options(items, any_label="any item")}</select></label>'
            '<label>Date <input type="date" name="date" value=""></label>'
            '<label>Sort <select name="sort">'
            '<option value="price_asc">price (low to high)</option>'
            '<option value="price_desc">price (high to low)</option>'
            "</select></label>"
            '<button type="submit">Find orders</button>'
            "</form>"
        )
        return _page(f"{self.title} lookup", "Filter fictional orders by customer, item, and date.", body)

    def _orders_results(self, query: dict[str, str]) -> str:
        rows = [
            r for r in self.db.records
            if (not query.get("user") or r["user"] == query["user"])
            and (not query.get("item") or r["item"] == query["item"])
            and (not query.get("date") or r["date"] == query["date"])
        ]
        reverse = query.get("sort") == "price_desc"
        rows.sort(key=lambda r: (r["price"], r["order_id"]), reverse=reverse)
        items = "".join(
            f'<li>{escape(r["user"])} bought {r["quantity"]} x {escape(r["item"])} on {r["date"]} '
            f'at price {r["price"]:.2f} (order <a href="/order/{r["order_id"]}">{r["order_id"]}</a>)</li>'
            for r in rows
        )
        body = f"<h2>Order results</h2><p>{len(rows)} orders found.</p><ol>{items}</ol>"
        return _page(f"{self.title} results", "Matching orders.", body)

    def _order_detail(self, order_id: str):
        match = [r for r in self.db.records if r["order_id"] == order_id]
        if not match:
            return None
        r = match[0]
        body = (
            f"<h2>Order {escape(r['order_id'])}</h2>"
            f"<p>{escape(r['user'])} bought {r['quantity']} x {escape(r['item'])} on {r['date']}.</p>"
            f"<p>Unit price: {r['price']:.2f}</p>"
        )
        return _page(f"Order {r['order_id']}", "Order detail.", body)

    def _stats_form(self) -> str:
        regions = sorted({r["region"] for r in self.db.records})
        metrics = sorted({r["metric"] for r in self.db.records})
        periods = sorted({r["period"] for r in self.db.records})
        if self.spec.tier == "widget":
            body = (
                "<h2>Statistics lookup</h2>" + _NOSCRIPT +
                '<div data-widget="radio_filter" data-field="region" data-target="stats-results" '
                f'data-choices={quoteattr(json.dumps(regions))} id="stats-region-filter"></div>'
                '<div data-widget="radio_filter" data-field="metric" data-target="stats-results" '
                f'data-choices={quoteattr(json.dumps(metrics))} id="stats-metric-filter"></div>'
                '<div id="stats-results" data-result-region="true"></div>'
                '<p><a href="/chart">Value chart</a></p>'
            )
            return _page(f"{self.title} lookup", "Filter indicators interactively.", body, self._widget_head())
        body = (
            "<h2>Statistics lookup</h2>"
            '<form action="/stats/results" method="post">'
            f'<label>Region <select name="region">{_options(regions)}</select></label>'
            f'<label>Metric <select name="metric">{_options(metrics)}</select></label>'
            f'<label>Period <select name="period">{_options(periods, any_label="all periods")}</select></label>'
            '<button type="submit">Look up</button>'
            "</form>"
        )
        return _page(f"{self.title} lookup", "Look up published indicator values.", body)

    def _stats_results(self, query: dict[str, str]) -> str:
        rows = [
            r for r in self.db.records
            if (not query.get("region") or r["region"] == query["region"])
            and (not query.get("metric") or r["metric"] == query["metric"])
            and (not query.get("period") or r["period"] == query["period"])
        ]
        rows.sort(key=lambda r: (r["region"], r["metric"], r["period"]))
        items = "".join(
            f'<li>{escape(r["region"])} {escape(r["metric"])} {r["period"]}: {r["value"]}</li>' for r in rows
        )
        single = f"<p>Value: {rows[0]['value']}</p>" if len(rows) == 1 else ""
        body = f"<h2>Lookup results</h2><p>{len(rows)} records found.</p>{single}<ul>{items}</ul>"
        return _page(f"{self.title} results", "Matching records.", body)

    def _reports(self) -> str:
        links = "".join(f'<li><a href="/download/{name}">{escape(name)}</a></li>' for name in self.download_names())
        body = (
            "<h2>Audited report files</h2>"
            "<p>Audited figures are published only inside the downloadable report files "
            "below; they are not reproduced on any page of this site.</p>"
            f"<ul>{links}</ul>"
        )
        return _page(f"{self.title} reports", "Downloadable audited report files.", body)

    def _chart(self, query: dict[str, str]) -> str:
        metrics = sorted({r["metric"] for r in self.db.records})
        periods = sorted({r["period"] for r in self.db.records})
        metric = query.get("metric") or metrics[0]
        period = query.get("period") or periods[0]
        regions = sorted({r["region"] for r in self.db.records if r["metric"] == metric and r["period"] == period})
        labels = "".join(f'<span class="chart-label">{escape(x)}</span> ' for x in regions)
        body = (
            "<h2>Value chart</h2>" + _NOSCRIPT +
            "<p>Bars show the selected metric by region; read the bar heights from the drawing.</p>"
            f'<canvas id="value-chart" data-widget="bar_chart" data-endpoint="/api/rows" '
            f'data-metric={quoteattr(metric)} data-period={quoteattr(period)} '
            'width="640" height="320"></canvas>'
            f"<p>Regions: {labels}</p>"
        )
        return _page(f"{self.title} chart", "Metric chart by region.", body, self._widget_head())
