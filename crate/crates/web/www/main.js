import init, { match_affiliation, label_text, locate_point } from "./pkg/gptatlas_web.js";

const $ = (id) => document.getElementById(id);
const fmt = (x) => (typeof x === "number" ? x.toFixed(4) : x);

function table(headers, rows, hit) {
  const head = "<tr>" + headers.map((h) => `<th>${h}</th>`).join("") + "</tr>";
  const body = rows
    .map((r, i) => `<tr class="${hit && hit(i) ? "hit" : ""}">` + r.map((c) => `<td>${fmt(c)}</td>`).join("") + "</tr>")
    .join("");
  return `<table>${head}${body}</table>`;
}

function guarded(out, f) {
  try {
    out.innerHTML = f();
  } catch (e) {
    out.innerHTML = `<pre>${e.message ?? e}</pre>`;
  }
}

function renderMatch() {
  $("m-accept-v").textContent = $("m-accept").value;
  guarded($("m-out"), () => {
    const r = JSON.parse(match_affiliation($("m-query").value, $("m-registry").value, Number($("m-accept").value)));
    const rows = r.candidates.map((c) => [c.id, c.name, c.token_sort, c.partial, c.combined]);
    return `<p>normalized: <code>${r.normalized}</code>; decision: <b>${r.matched_id ?? "no match"}</b> (${r.method}, score ${fmt(r.score)})</p>` +
      table(["id", "name", "token sort", "partial", "combined"], rows, (i) => r.candidates[i].id === r.matched_id);
  });
}

function renderTopics() {
  $("t-gamma-v").textContent = $("t-gamma").value;
  guarded($("t-out"), () => {
    const r = JSON.parse(label_text($("t-text").value, $("t-model").value, $("t-dl").value, Number($("t-gamma").value)));
    const rows = r.topics.map((t) => [t.topic_id + (t.dl ? " (DL)" : ""), t.score, t.threshold, t.assigned ? "yes" : "no", t.matched.join(" ")]);
    return `<p>DL paper: <b>${r.is_dl ? "yes" : "no"}</b>; tokens: <code>${r.tokens.join(" ")}</code></p>` +
      table(["topic", "score", "threshold", "assigned", "matched words"], rows, (i) => r.topics[i].assigned);
  });
}

function renderGeo() {
  guarded($("g-out"), () => {
    const r = JSON.parse(locate_point(Number($("g-lat").value), Number($("g-lon").value), $("g-geo").value));
    const rows = r.containing.map((h) => [h.region_id, h.country_code]);
    return `<p>assigned region: <b>${r.assigned ?? "none"}</b> (${r.regions} regions loaded, ${r.rejected} rejected)</p>` +
      (rows.length ? table(["region", "country"], rows) : "");
  });
}

await init();
for (const id of ["m-query", "m-accept", "m-registry"]) $(id).addEventListener("input", renderMatch);
for (const id of ["t-text", "t-gamma", "t-dl", "t-model"]) $(id).addEventListener("input", renderTopics);
for (const id of ["g-lat", "g-lon", "g-geo"]) $(id).addEventListener("input", renderGeo);
renderMatch();
renderTopics();
renderGeo();
