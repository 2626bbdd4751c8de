/**
 * Entry point: wires the state machine to the DOM and the keyboard.
 *
 * Shortcuts: 1-9 select a candidate, Enter/c confirm the selection,
 * x reject, m manual QID, a absent, j/k move, g reload, ? help.
 */

import { ApiClient } from "./api.js";
import {
  renderCard,
  renderConflict,
  renderCoverage,
  renderError,
  renderQueueList,
} from "./render.js";
import { ReviewSession } from "./state.js";

function queryToken(): string | null {
  const fromUrl = new URLSearchParams(window.location.search).get("token");
  if (fromUrl !== null) {
    sessionStorage.setItem("review-token", fromUrl);
    return fromUrl;
  }
  return sessionStorage.getItem("review-token");
}

function mount(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id} in index.html`);
  return node;
}

export function startApp(): void {
  const api = new ApiClient("", queryToken());
  const session = new ReviewSession(api);
  session.reviewer = sessionStorage.getItem("review-reviewer");

  const coverageRegion = mount("coverage");
  const queueRegion = mount("queue");
  const cardRegion = mount("card");
  const bannerRegion = mount("banner");
  const statusBar = mount("status-bar");
  const helpRegion = mount("help");

  function redraw(): void {
    coverageRegion.replaceChildren(renderCoverage(session.stats));
    queueRegion.replaceChildren(renderQueueList(session.items, session.index));

    bannerRegion.replaceChildren();
    if (session.conflict) {
      const banner = renderConflict(session.conflict);
      banner.querySelector("button.ack-conflict")?.addEventListener("click", () => {
        session.acknowledgeConflict();
      });
      bannerRegion.append(banner);
    } else if (session.error) {
      bannerRegion.append(renderError(session.error));
    }

    const item = session.current;
    if (item) {
      const card = renderCard(item, session.selected);
      card.querySelectorAll("li.candidate").forEach((li, i) => {
        li.addEventListener("click", () => session.selectCandidate(i));
      });
      cardRegion.replaceChildren(card);
    } else {
      const done = document.createElement("p");
      done.className = "queue-empty";
      done.textContent = "queue is empty";
      cardRegion.replaceChildren(done);
    }

    statusBar.textContent =
      `${session.remaining} in queue, ${session.decidedThisSession} decided this session` +
      (session.busy ? ", saving..." : "");
  }

  async function act(run: () => Promise<unknown>): Promise<void> {
    try {
      await run();
    } catch (err) {
      session.error = err instanceof Error ? err.message : String(err);
    }
    await session.refreshStats().catch(() => undefined);
  }

  document.addEventListener("keydown", (event) => {
    if (event.target instanceof HTMLInputElement) return;
    if (event.key >= "1" && event.key <= "9") {
      session.selectCandidate(Number(event.key) - 1);
      return;
    }
    switch (event.key) {
      case "Enter":
      case "c":
        void act(() => session.decide("confirm"));
        break;
      case "x":
        void act(() => session.decide("reject"));
        break;
      case "m": {
        const qid = window.prompt("QID for the manual mapping (e.g. Q42):");
        if (qid) void act(() => session.decide("manual", { qid: qid.trim() }));
        break;
      }
      case "a":
        void act(() => session.decide("absent"));
        break;
      case "j":
      case "ArrowDown":
        session.next();
        break;
      case "k":
      case "ArrowUp":
        session.previous();
        break;
      case "g":
        void act(() => session.load());
        break;
      case "?":
        helpRegion.classList.toggle("hidden");
        break;
      case "Escape":
        session.acknowledgeConflict();
        break;
    }
  });

  session.onChange(redraw);
  void act(() => session.load());
}

startApp();
