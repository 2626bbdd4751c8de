/**
 * DOM builders for the review screens. Pure functions from API payloads
 * to elements; candidates are rendered exactly in the order the server
 * sent them, never re-ranked here.
 */

import type {
  CandidateJson,
  QueueItem,
  RecordJson,
  StatsResponse,
} from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function externalLink(href: string, text: string): HTMLAnchorElement {
  const a = el("a", "qid-link", text);
  a.href = href;
  a.target = "_blank";
  a.rel = "noopener";
  return a;
}

export function renderCandidate(
  candidate: CandidateJson,
  position: number,
  selected: boolean,
): HTMLLIElement {
  const li = el("li", selected ? "candidate selected" : "candidate");
  li.dataset.qid = candidate.qid;

  const head = el("div", "candidate-head");
  head.append(
    el("span", "candidate-key", String(position + 1)),
    externalLink(candidate.qid_url, candidate.qid),
    el("span", "candidate-label", candidate.label || "(no label)"),
    el("span", "candidate-score", candidate.final_score.toFixed(2)),
    el("span", "candidate-source", candidate.source),
  );
  li.append(head);

  if (candidate.evidence.length > 0) {
    li.append(el("div", "candidate-evidence", candidate.evidence.join("  ")));
  }
  for (const [reason, amount] of candidate.penalties) {
    li.append(el("div", "candidate-penalty", `-${amount} ${reason}`));
  }
  return li;
}

export function renderCard(item: QueueItem, selected: number): HTMLElement {
  const card = el("section", "card");
  card.dataset.entryId = String(item.entry_id);

  const head = el("header", "card-head");
  head.append(
    el("h2", "card-title", item.title),
    el("span", `nature nature-${item.nature}`, item.nature),
    el("span", "entry-id", `#${item.entry_id}`),
    el("span", `status status-${item.status}`, item.status),
  );
  card.append(head);

  if (item.summary) card.append(el("p", "summary", item.summary));
  if (item.qid) {
    const line = el("p", "current-mapping", "current mapping: ");
    line.append(externalLink(`https://www.wikidata.org/wiki/${item.qid}`, item.qid));
    if (item.confidence !== null) {
      line.append(el("span", "confidence", ` (${item.confidence.toFixed(2)})`));
    }
    card.append(line);
  }
  if (item.reasons.length > 0) {
    card.append(el("p", "reasons", item.reasons.join(", ")));
  }

  const list = el("ol", "candidates");
  item.candidates.forEach((candidate, i) => {
    list.append(renderCandidate(candidate, i, i === selected));
  });
  if (item.candidates.length === 0) {
    card.append(el("p", "no-candidates", "no candidates recorded"));
  }
  card.append(list);
  return card;
}

export function renderQueueList(items: QueueItem[], index: number): HTMLElement {
  const list = el("ul", "queue-list");
  items.forEach((item, i) => {
    const li = el("li", i === index ? "queue-row active" : "queue-row");
    li.dataset.entryId = String(item.entry_id);
    li.append(
      el("span", "queue-title", item.title),
      el("span", `nature nature-${item.nature}`, item.nature),
    );
    list.append(li);
  });
  return list;
}

export function renderCoverage(stats: StatsResponse | null): HTMLElement {
  const panel = el("div", "coverage-panel");
  if (!stats) return panel;

  const counts = el("div", "status-counts");
  for (const [status, count] of Object.entries(stats.review)) {
    counts.append(el("span", `count count-${status}`, `${status}: ${count}`));
  }
  panel.append(counts);

  if (stats.coverage) {
    const table = el("table", "coverage-table");
    const head = el("tr");
    for (const col of ["nature", "mapped", "ambiguous", "unmapped", "coverage"]) {
      head.append(el("th", undefined, col));
    }
    table.append(head);
    for (const [nature, c] of Object.entries(stats.coverage)) {
      const row = el("tr");
      row.className = `coverage-${nature}`;
      row.append(
        el("td", undefined, nature),
        el("td", undefined, String(c.mapped)),
        el("td", undefined, String(c.ambiguous)),
        el("td", undefined, String(c.unmapped)),
        el("td", "coverage-value", c.coverage === null ? "-" : c.coverage.toFixed(3)),
      );
      table.append(row);
    }
    panel.append(table);
  }
  return panel;
}

export function renderConflict(record: RecordJson): HTMLElement {
  const banner = el("div", "conflict-banner");
  banner.append(el("strong", undefined, "already decided"));
  const who = record.reviewer ? ` by ${record.reviewer}` : "";
  const what = record.qid ? `${record.status} -> ${record.qid}` : record.status;
  banner.append(el("span", "conflict-detail", `${what}${who}. Your verdict was not saved.`));
  if (record.qid_url && record.qid) {
    banner.append(externalLink(record.qid_url, record.qid));
  }
  const ok = el("button", "ack-conflict", "keep theirs and continue");
  banner.append(ok);
  return banner;
}

export function renderError(message: string): HTMLElement {
  const banner = el("div", "error-banner");
  banner.append(
    el("strong", undefined, "request failed"),
    el("span", undefined, ` ${message} `),
    el("span", "error-hint", "the item stays in the queue"),
  );
  return banner;
}
