/**
 * Gallery view model: all client-side state and API wiring.
 *
 * The model mirrors the server exactly — cards keep the server's rank
 * order, every action maps to one API call, and no evolution logic
 * lives here. Advance is single-flight and polls while the server
 * evolves.
 */

import { ApiClient, GenerationListing, SessionState, ShapeEntry } from "./api.js";

export interface ShapeCard {
  entry: ShapeEntry;
  selected: boolean;
}

export type Listener = () => void;

const sleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

export class GalleryViewModel {
  session: SessionState | null = null;
  listing: GenerationListing | null = null;
  cards: ShapeCard[] = [];
  knownLabels: string[] = [];
  activeLabels: Set<string> = new Set();
  selected: Set<string> = new Set();
  statusBanner = "";
  errorBanner = "";
  advancing = false;

  private listeners: Listener[] = [];

  constructor(readonly api: ApiClient, readonly pollIntervalMs = 2000) {}

  onChange(listener: Listener): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const l of this.listeners) l();
  }

  /** Create a session over a server-side dataset directory. */
  async createSession(datasetDir: string, labels: string[], options: Record<string, unknown> = {}): Promise<void> {
    this.session = await this.api.createSession(datasetDir, {
      user_labels: labels,
      ...options,
    } as never);
    this.activeLabels = new Set(this.session.config.user_labels);
    await this.loadGeneration(0);
    // The constraint list offers exactly the labels present in the input
    // population.
    const seen = new Set<string>();
    for (const card of this.cards) for (const l of card.entry.labels) seen.add(l);
    this.knownLabels = [...seen].sort();
    this.notify();
  }

  /** Attach to an existing session (e.g. after a page reload). */
  async attach(sessionId: string): Promise<void> {
    this.session = await this.api.getSession(sessionId);
    this.activeLabels = new Set(this.session.config.user_labels);
    await this.loadGeneration(this.session.generation_count - 1);
    if (this.knownLabels.length === 0) {
      const g0 = await this.api.getGeneration(sessionId, 0);
      const seen = new Set<string>();
      for (const s of g0.shapes) for (const l of s.labels) seen.add(l);
      this.knownLabels = [...seen].sort();
    }
    this.notify();
  }

  async loadGeneration(index: number): Promise<void> {
    if (!this.session) throw new Error("no session");
    this.listing = await this.api.getGeneration(this.session.session_id, index);
    this.selected = new Set();
    // Cards strictly in server rank order.
    this.cards = this.listing.shapes.map((entry) => ({ entry, selected: false }));
    this.statusBanner = `Generation ${index} — ${this.listing.shapes.length} shapes`;
    this.notify();
  }

  get generationIndex(): number {
    return this.listing ? this.listing.index : -1;
  }

  toggleCard(shapeId: string): void {
    const card = this.cards.find((c) => c.entry.id === shapeId);
    if (!card) return;
    card.selected = !card.selected;
    if (card.selected) this.selected.add(shapeId);
    else this.selected.delete(shapeId);
    this.notify();
  }

  /** Only labels that exist in the input population are selectable. */
  setConstraint(label: string, active: boolean): boolean {
    if (!this.knownLabels.includes(label)) return false;
    if (active) this.activeLabels.add(label);
    else this.activeLabels.delete(label);
    this.notify();
    return true;
  }

  get canAdvance(): boolean {
    return (
      this.selected.size > 0 &&
      !this.advancing &&
      this.session !== null &&
      this.session.status === "AwaitingSelection"
    );
  }

  /** Request body for the next advance: exactly the toggled ids plus the
   *  active constraint set. */
  advanceRequest(): { selected: string[]; labels: string[] } {
    return {
      selected: this.cards.filter((c) => c.selected).map((c) => c.entry.id),
      labels: [...this.activeLabels].sort(),
    };
  }

  /** Advance one generation and poll until the server finishes. */
  async advance(): Promise<void> {
    if (!this.session) throw new Error("no session");
    if (!this.canAdvance) throw new Error("advance not available");
    const body = this.advanceRequest();
    this.advancing = true;
    this.errorBanner = "";
    this.statusBanner = "Evolving…";
    this.notify();
    try {
      this.session = await this.api.advance(this.session.session_id, body.selected, body.labels);
      while (this.session.status === "Evolving") {
        await sleep(this.pollIntervalMs);
        this.session = await this.api.getSession(this.session.session_id);
        this.notify();
      }
      if (this.session.status === "Error") {
        this.errorBanner = this.session.error ?? "evolution failed";
      } else {
        this.activeLabels = new Set(this.session.config.user_labels);
        await this.loadGeneration(this.session.generation_count - 1);
      }
    } catch (err) {
      this.errorBanner = err instanceof Error ? err.message : String(err);
    } finally {
      this.advancing = false;
      this.notify();
    }
  }
}
