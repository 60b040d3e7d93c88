// Session state and timeline, driven entirely by service payloads.
// Every state transition round-trips through the HTTP API; the store
// only records what came back.

import {
    ApiClient,
    BeliefPair,
    CreateSessionBody,
    ObserveResponse,
    SessionView,
    WhatIfEntry,
} from './api.js'

export interface TimelineEntry {
    t: number
    observation: number
    announcement: number | null
    // Mode of the belief histogram returned for this week; null for
    // weeks replayed from a restored session (the service keeps only
    // the current belief).
    belief_mode: number | null
    completed: boolean
    changed: boolean
}

// Selection only: picks the completion of the highest-probability pair,
// resolving near-ties (1e-12) toward the earliest week. No new numbers
// are produced.
export function beliefMode(pairs: BeliefPair[]): number {
    let top = -Infinity
    for (const pair of pairs) {
        if (pair.probability > top) top = pair.probability
    }
    for (const pair of pairs) {
        if (pair.probability >= top - 1e-12) return pair.completion
    }
    throw new Error('empty belief histogram')
}

export class SessionStore {
    view: SessionView | null = null
    lastObserve: ObserveResponse | null = null
    timeline: TimelineEntry[] = []

    constructor(private readonly api: ApiClient) {}

    get sessionId(): string | null {
        return this.view ? this.view.id : null
    }

    get belief(): BeliefPair[] {
        if (this.lastObserve) return this.lastObserve.belief
        return this.view ? this.view.belief : []
    }

    get whatIf(): WhatIfEntry[] {
        return this.lastObserve ? this.lastObserve.what_if : []
    }

    get recommendation(): number | null {
        if (this.lastObserve) return this.lastObserve.recommendation
        return this.view ? this.view.recommendation : null
    }

    async create(body: CreateSessionBody): Promise<string> {
        const { id } = await this.api.createSession(body)
        this.view = await this.api.getSession(id)
        this.lastObserve = null
        this.timeline = []
        return id
    }

    // Rebuild from the server after a refresh. Past weeks keep their
    // observations and announcements; their belief modes are unknown.
    async restore(id: string): Promise<void> {
        const view = await this.api.getSession(id)
        this.view = view
        this.lastObserve = null
        this.timeline = []
        const { observations, completed_flags, announcements } = view.history
        for (let t = 0; t < observations.length; t++) {
            const announcement = t < announcements.length ? announcements[t]! : null
            const prev = t > 0 ? announcements[t - 1]! : null
            this.timeline.push({
                t,
                observation: observations[t]!,
                announcement,
                belief_mode: null,
                completed: completed_flags[t] ?? false,
                changed: announcement !== null && prev !== null && announcement !== prev,
            })
        }
    }

    async submitEstimate(estimate: number, completed: boolean): Promise<ObserveResponse> {
        if (!this.view) throw new Error('no session')
        const payload = await this.api.observe(this.view.id, estimate, completed)
        this.lastObserve = payload
        this.view = payload.session
        this.timeline.push({
            t: payload.session.clock,
            observation: estimate,
            announcement: null,
            belief_mode: beliefMode(payload.belief),
            completed,
            changed: false,
        })
        return payload
    }

    async commitAnnouncement(announce: number): Promise<SessionView> {
        if (!this.view) throw new Error('no session')
        const previous = this.lastAnnouncement()
        const view = await this.api.announce(this.view.id, announce)
        this.view = view
        const entry = this.timeline[this.timeline.length - 1]
        if (entry && entry.announcement === null) {
            entry.announcement = announce
            entry.changed = previous !== null && announce !== previous
        }
        return view
    }

    lastAnnouncement(): number | null {
        for (let i = this.timeline.length - 1; i >= 0; i--) {
            const a = this.timeline[i]!.announcement
            if (a !== null) return a
        }
        return null
    }
}
